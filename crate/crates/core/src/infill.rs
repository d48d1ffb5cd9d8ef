//! Content providers: turning empty table skeletons into filled tables.
//!
//! Two providers implement the same [`ContentProvider`] interface. The
//! template provider is fully deterministic and offline, driven by domain
//! lexicons and a stable hash; it exists so every pipeline stage can run and
//! be tested without a model behind it. The LLM provider speaks an
//! OpenAI-style chat completions protocol through a pluggable [`Transport`],
//! records every exchange to a transcript, and can replay a transcript
//! instead of calling out, which makes model-backed runs reproducible.
//!
//! Whatever the provider, filled output is verified against the input
//! skeleton: same row count, same per-row logical widths. Content may be
//! anything; structure may not drift.

use crate::checker::entities;
use crate::html::{html_to_grid, parse_document, replace_table, splice_contents, ParseError};
use crate::model::{derive_labels, HeaderLayout, Language, StyleSpec, TableGrid};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{HashMap, HashSet, VecDeque};
use std::io::{BufRead, Write};
use std::sync::{Condvar, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowWidthDiff {
    pub row: usize,
    /// Logical width the skeleton requires; None when the row only exists
    /// in the filled output.
    pub expected: Option<usize>,
    /// Width the filled output produced; None when the row disappeared.
    pub got: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InfillError {
    /// The provider itself failed (network, auth, missing replay entry).
    #[error("provider failure: {message}")]
    Provider { message: String, retryable: bool },
    /// The provider answered, but not in the agreed shape.
    #[error("malformed provider response: {detail}")]
    ResponseFormat { detail: String },
    /// The filled table no longer matches the skeleton's grid.
    #[error("structure drift: {detail}")]
    StructureDrift { diff: Vec<RowWidthDiff>, detail: String },
    /// The input handed to the provider was unusable.
    #[error("invalid input: {detail}")]
    InvalidInput { detail: String },
}

fn invalid(detail: impl Into<String>) -> InfillError {
    InfillError::InvalidInput { detail: detail.into() }
}

/// Fills table skeletons with content. Implementations must be shareable
/// across the generator's worker threads.
pub trait ContentProvider: Send + Sync {
    /// Up to `n` fresh topics, none equal to an entry of `used`.
    fn topics(&self, domain: &str, language: Language, used: &[String], n: usize) -> Result<Vec<String>, InfillError>;

    /// Fills header cells of a skeleton document; body cells stay empty.
    fn fill_headers(&self, html: &str, topic: &str, domain: &str, language: Language) -> Result<String, InfillError>;

    /// Produces `n_variants` documents with body cells filled, all sharing
    /// the input's structure and headers but differing in values.
    fn fill_bodies(
        &self,
        html: &str,
        topic: &str,
        domain: &str,
        language: Language,
        n_variants: usize,
    ) -> Result<Vec<String>, InfillError>;
}

/// Per-row logical widths of a valid grid (every row covers `n_cols`).
fn grid_widths(grid: &TableGrid) -> Vec<usize> {
    vec![grid.n_cols; grid.n_rows]
}

fn width_diff(expected: &[usize], got: &[usize]) -> Vec<RowWidthDiff> {
    let rows = expected.len().max(got.len());
    (0..rows)
        .filter_map(|r| {
            let e = expected.get(r).copied();
            let g = got.get(r).copied();
            (e != g).then_some(RowWidthDiff { row: r, expected: e, got: g })
        })
        .collect()
}

/// Checks that `candidate` still has the skeleton's structure: same number
/// of rows, same logical width in every row. The skeleton must be valid;
/// a candidate that fails to parse at all is reported as drift too, carrying
/// whatever width information the parse error exposes.
pub fn verify_structure(skeleton: &str, candidate: &str) -> Result<(), InfillError> {
    let expected = grid_widths(&html_to_grid(skeleton).map_err(|e| invalid(format!("skeleton does not parse: {e}")))?);
    let got = match html_to_grid(candidate) {
        Ok(grid) => grid_widths(&grid),
        Err(ParseError::RaggedRows { widths }) => widths,
        Err(e) => {
            return Err(InfillError::StructureDrift {
                diff: Vec::new(),
                detail: format!("filled table does not parse: {e}"),
            })
        }
    };
    let diff = width_diff(&expected, &got);
    if diff.is_empty() {
        Ok(())
    } else {
        Err(InfillError::StructureDrift {
            diff,
            detail: format!("expected row widths {expected:?}, got {got:?}"),
        })
    }
}

// ---------------------------------------------------------------------------
// Template provider

/// Word material for one domain and language.
struct Lexicon {
    keywords: &'static [&'static str],
    phrases: &'static [&'static str],
    group_labels: &'static [&'static str],
    column_headers: &'static [&'static str],
    text_values: &'static [&'static str],
    /// `{}` is replaced by a 2-3 digit number; keep unit letters short so
    /// the values read as numeric to the surrogate ranker.
    numeric_formats: &'static [&'static str],
    /// Joins keyword and phrase into a topic.
    space: &'static str,
    series_word: &'static str,
}

static TELECOM_EN: Lexicon = Lexicon {
    keywords: &[
        "5G", "4G LTE", "optical fiber", "broadband", "VoLTE", "roaming", "data plan", "prepaid",
        "postpaid", "IPTV", "VoIP", "SMS bundle", "hotspot", "router", "modem", "SIM card", "eSIM",
        "network coverage", "signal strength", "bandwidth", "latency", "spectrum", "base station",
        "satellite link", "leased line", "cloud PBX", "contract plan", "family plan", "unlimited data",
        "international calls", "wearable plan", "enterprise WAN", "plan pricing",
    ],
    phrases: &[
        "plan pricing", "coverage by region", "speed tiers", "monthly fees", "feature comparison",
        "usage limits", "promotional offers", "service levels",
    ],
    group_labels: &["Network", "Pricing", "Coverage", "Performance", "Support", "Features"],
    column_headers: &[
        "Tier", "Region", "Speed", "Monthly Fee", "Data Cap", "Setup Cost", "Rating", "Availability",
        "Channel", "Term",
    ],
    text_values: &[
        "entry", "standard", "plus", "premium", "enterprise", "north zone", "south zone", "urban core",
        "rural", "bundled", "standalone", "limited", "unlimited",
    ],
    numeric_formats: &["{}", "{}%", "{} GB", "{} ms", "{} kr"],
    space: " ",
    series_word: "series",
};

static TELECOM_ZH: Lexicon = Lexicon {
    keywords: &[
        "5G", "4G网络", "光纤", "宽带", "VoLTE高清语音", "国际漫游", "流量套餐", "预付费", "后付费",
        "网络电视", "网络电话", "短信包", "热点共享", "路由器", "调制解调器", "SIM卡", "eSIM",
        "网络覆盖", "信号强度", "带宽", "时延", "频谱", "基站", "卫星链路", "专线", "云总机",
        "合约套餐", "家庭套餐", "不限量流量", "国际长途", "穿戴设备套餐", "企业广域网", "资费定价",
    ],
    phrases: &["资费对比", "区域覆盖", "速率档位", "月费明细", "功能对比", "用量限制", "优惠活动", "服务等级"],
    group_labels: &["网络", "资费", "覆盖", "性能", "支持", "功能"],
    column_headers: &["档位", "地区", "速率", "月费", "流量上限", "安装费", "评分", "可用性", "渠道", "期限"],
    text_values: &["入门", "标准", "升级", "高级", "企业", "北区", "南区", "城区", "乡镇", "捆绑", "独立", "受限", "不限"],
    numeric_formats: &["{}", "{}%", "{} GB", "{} ms", "{} 元"],
    space: "",
    series_word: "系列",
};

static GENERIC_EN: Lexicon = Lexicon {
    keywords: &[
        "inventory", "staffing", "budget", "maintenance", "logistics", "quality", "training", "sales",
        "energy use", "scheduling", "compliance", "equipment",
    ],
    phrases: &[
        "summary by quarter", "regional breakdown", "category comparison", "annual totals",
        "status overview", "allocation table",
    ],
    group_labels: &["Overview", "Details", "Totals", "Status"],
    column_headers: &["Category", "Region", "Count", "Amount", "Share", "Status", "Period", "Owner"],
    text_values: &[
        "north", "south", "east", "west", "central", "open", "closed", "pending", "approved", "primary",
        "secondary",
    ],
    numeric_formats: &["{}", "{}%", "{} kg", "{} h"],
    space: " ",
    series_word: "series",
};

static GENERIC_ZH: Lexicon = Lexicon {
    keywords: &["库存", "人员", "预算", "维护", "物流", "质量", "培训", "销售", "能耗", "排班", "合规", "设备"],
    phrases: &["季度汇总", "区域明细", "类别对比", "年度总计", "状态总览", "分配表"],
    group_labels: &["总览", "明细", "合计", "状态"],
    column_headers: &["类别", "区域", "数量", "金额", "占比", "状态", "周期", "负责人"],
    text_values: &["北区", "南区", "东区", "西区", "中部", "开放", "关闭", "待定", "已批", "主要", "次要"],
    numeric_formats: &["{}", "{}%", "{} kg", "{} h"],
    space: "",
    series_word: "系列",
};

/// Stable 64-bit hash (FNV-1a over parts with separators). The standard
/// library hasher is explicitly unstable across releases; content must not
/// move when the toolchain does.
fn stable_hash(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for b in part.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0x1f;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn pick<'a>(pool: &[&'a str], hash: u64) -> &'a str {
    pool[(hash % pool.len() as u64) as usize]
}

/// Deterministic offline provider. The same (skeleton, topic, domain,
/// language) always produces the same fill, with no I/O anywhere.
#[derive(Debug, Default, Clone, Copy)]
pub struct TemplateProvider;

impl TemplateProvider {
    fn lexicon(domain: &str, language: Language) -> &'static Lexicon {
        let known = domain.eq_ignore_ascii_case("telecom");
        if !known {
            warn_unknown_domain_once(domain);
        }
        match (known, language) {
            (true, Language::En) => &TELECOM_EN,
            (true, Language::Zh) => &TELECOM_ZH,
            (false, Language::En) => &GENERIC_EN,
            (false, Language::Zh) => &GENERIC_ZH,
        }
    }

    fn numeric_value(lex: &Lexicon, hash: u64) -> String {
        let n = 10 + (hash >> 8) % 990;
        pick(lex.numeric_formats, hash).replace("{}", &n.to_string())
    }

    /// Value type of a body column (or row, for horizontal layouts). Column
    /// 0 under a vertical layout holds row labels, so it stays textual.
    fn group_is_numeric(topic: &str, group: usize, label_group: bool) -> bool {
        !label_group && stable_hash(&[topic, "type", &group.to_string()]) % 3 != 0
    }
}

static WARNED_DOMAINS: OnceLock<Mutex<HashSet<String>>> = OnceLock::new();

fn warn_unknown_domain_once(domain: &str) {
    let warned = WARNED_DOMAINS.get_or_init(|| Mutex::new(HashSet::new()));
    let mut guard = warned.lock().expect("domain warn set poisoned");
    if guard.insert(domain.to_string()) {
        log::warn!("no lexicon for domain {domain:?}; using the generic one");
    }
}

impl ContentProvider for TemplateProvider {
    fn topics(&self, domain: &str, language: Language, used: &[String], n: usize) -> Result<Vec<String>, InfillError> {
        let lex = Self::lexicon(domain, language);
        let used: HashSet<&str> = used.iter().map(String::as_str).collect();
        let mut out = Vec::with_capacity(n);
        // Round 0 is the bare keyword x phrase grid; later rounds append a
        // series suffix, so the supply never runs out.
        for round in 0u64.. {
            for kw in lex.keywords {
                for ph in lex.phrases {
                    if out.len() == n {
                        return Ok(out);
                    }
                    let base = format!("{kw}{}{ph}", lex.space);
                    let topic = if round == 0 {
                        base
                    } else {
                        format!("{base}{}{} {}", lex.space, lex.series_word, round + 1)
                    };
                    if !used.contains(topic.as_str()) && !out.contains(&topic) {
                        out.push(topic);
                    }
                }
            }
        }
        unreachable!("the series loop is unbounded")
    }

    fn fill_headers(&self, html: &str, topic: &str, domain: &str, language: Language) -> Result<String, InfillError> {
        let lex = Self::lexicon(domain, language);
        let parsed = parse_document(html).map_err(|e| invalid(format!("skeleton does not parse: {e}")))?;
        let mut replacements: Vec<(usize, String)> = Vec::new();
        let mut seen_first = false;
        for (idx, cell) in parsed.grid.cells.iter().enumerate() {
            if !cell.is_header {
                continue;
            }
            let text = if !seen_first {
                seen_first = true;
                topic.to_string()
            } else if cell.is_spanning() {
                pick(lex.group_labels, stable_hash(&[topic, "group", &idx.to_string()])).to_string()
            } else {
                // Walk the pool from a topic-dependent offset so sibling
                // headers come out distinct.
                let base = stable_hash(&[topic, "header"]);
                lex.column_headers[((base + idx as u64) % lex.column_headers.len() as u64) as usize].to_string()
            };
            replacements.push((idx, text));
        }
        let filled = splice_contents(html, &parsed, &replacements);
        verify_structure(html, &filled)?;
        Ok(filled)
    }

    fn fill_bodies(
        &self,
        html: &str,
        topic: &str,
        domain: &str,
        language: Language,
        n_variants: usize,
    ) -> Result<Vec<String>, InfillError> {
        let lex = Self::lexicon(domain, language);
        let parsed = parse_document(html).map_err(|e| invalid(format!("input does not parse: {e}")))?;
        let grid = &parsed.grid;
        let layout = derive_labels(grid, &StyleSpec::plain()).header_layout;
        let mut out = Vec::with_capacity(n_variants);
        for variant in 0..n_variants {
            let mut replacements: Vec<(usize, String)> = Vec::new();
            let mut first_body = true;
            for (idx, cell) in grid.cells.iter().enumerate() {
                if cell.is_header {
                    continue;
                }
                let text = if first_body {
                    first_body = false;
                    // A variant-numbered decimal: keeps the cell numeric and
                    // makes every variant pairwise distinct.
                    format!("{}.{variant}", 10 + stable_hash(&[topic, "anchor"]) % 89)
                } else {
                    let group = match layout {
                        HeaderLayout::Horizontal => cell.row_start,
                        HeaderLayout::Vertical | HeaderLayout::Matrix => cell.col_start,
                    };
                    let label_group = matches!(layout, HeaderLayout::Vertical | HeaderLayout::Matrix) && group == 0
                        || matches!(layout, HeaderLayout::Horizontal) && group == 0;
                    let h = stable_hash(&[topic, "value", &variant.to_string(), &cell.row_start.to_string(), &cell.col_start.to_string()]);
                    if Self::group_is_numeric(topic, group, label_group) {
                        TemplateProvider::numeric_value(lex, h)
                    } else {
                        pick(lex.text_values, h).to_string()
                    }
                };
                replacements.push((idx, text));
            }
            let filled = splice_contents(html, &parsed, &replacements);
            verify_structure(html, &filled)?;
            out.push(filled);
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Transcript

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request: Value,
    pub response: Value,
    pub timestamp_ms: u64,
}

/// Append-only record of provider exchanges, saved as JSONL. A transcript
/// written by a live run can later drive [`ReplayTransport`].
#[derive(Debug, Default)]
pub struct Transcript {
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl Transcript {
    pub fn new() -> Transcript {
        Transcript::default()
    }

    pub fn record(&self, request: Value, response: Value) {
        let timestamp_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        self.entries.lock().expect("transcript poisoned").push(TranscriptEntry {
            request,
            response,
            timestamp_ms,
        });
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().expect("transcript poisoned").clone()
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for entry in self.entries().iter() {
            serde_json::to_writer(&mut f, entry)?;
            f.write_all(b"\n")?;
        }
        f.flush()
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<Transcript> {
        let file = std::fs::File::open(path)?;
        let mut entries = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, format!("transcript line {}: {e}", lineno + 1))
            })?;
            entries.push(entry);
        }
        Ok(Transcript { entries: Mutex::new(entries) })
    }
}

// ---------------------------------------------------------------------------
// Transports

/// One round trip to a model endpoint: a chat-completions style request
/// value in, a response value out.
pub trait Transport: Send + Sync {
    fn send(&self, request: &Value) -> Result<Value, InfillError>;
}

/// Serves recorded responses keyed by the exact request. Multiple recorded
/// responses for one request are replayed in order.
pub struct ReplayTransport {
    responses: Mutex<HashMap<String, VecDeque<Value>>>,
}

impl ReplayTransport {
    pub fn from_transcript(transcript: &Transcript) -> ReplayTransport {
        let mut responses: HashMap<String, VecDeque<Value>> = HashMap::new();
        for entry in transcript.entries() {
            responses.entry(canonical(&entry.request)).or_default().push_back(entry.response);
        }
        ReplayTransport { responses: Mutex::new(responses) }
    }
}

/// serde_json maps iterate in sorted key order, so this is a canonical form.
fn canonical(v: &Value) -> String {
    serde_json::to_string(v).expect("json value serializes")
}

impl Transport for ReplayTransport {
    fn send(&self, request: &Value) -> Result<Value, InfillError> {
        let key = canonical(request);
        let mut map = self.responses.lock().expect("replay map poisoned");
        match map.get_mut(&key).and_then(VecDeque::pop_front) {
            Some(resp) => Ok(resp),
            None => Err(InfillError::Provider {
                message: "no recorded response for this request".to_string(),
                retryable: false,
            }),
        }
    }
}

/// Live HTTP transport for OpenAI-style chat completions endpoints. The API
/// key is read from the environment variable named in the config at send
/// time; it never appears in configuration files.
pub struct HttpTransport {
    endpoint: String,
    api_key_env: String,
    max_retries: u32,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: &str, api_key_env: &str, timeout_ms: u64, max_retries: u32) -> HttpTransport {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(std::time::Duration::from_millis(timeout_ms)))
            .build();
        HttpTransport {
            endpoint: endpoint.to_string(),
            api_key_env: api_key_env.to_string(),
            max_retries,
            agent: config.into(),
        }
    }

    fn attempt(&self, request: &Value, key: &str) -> Result<Value, InfillError> {
        let response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(request);
        match response {
            Ok(mut resp) => resp.body_mut().read_json::<Value>().map_err(|e| InfillError::Provider {
                message: format!("response body is not JSON: {e}"),
                retryable: false,
            }),
            Err(ureq::Error::StatusCode(code)) => Err(InfillError::Provider {
                message: format!("endpoint returned HTTP {code}"),
                retryable: code == 429 || code >= 500,
            }),
            Err(e) => Err(InfillError::Provider { message: format!("transport error: {e}"), retryable: true }),
        }
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &Value) -> Result<Value, InfillError> {
        let key = std::env::var(&self.api_key_env).map_err(|_| InfillError::Provider {
            message: format!("environment variable {} is not set", self.api_key_env),
            retryable: false,
        })?;
        let mut delay = std::time::Duration::from_millis(200);
        let mut last = None;
        for _ in 0..=self.max_retries {
            match self.attempt(request, &key) {
                Ok(v) => return Ok(v),
                Err(e @ InfillError::Provider { retryable: true, .. }) => {
                    last = Some(e);
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt ran"))
    }
}

// ---------------------------------------------------------------------------
// LLM provider

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmProviderConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Concurrent in-flight requests across all worker threads.
    #[serde(default = "default_in_flight")]
    pub max_inflight: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_timeout() -> u64 {
    60_000
}
fn default_retries() -> u32 {
    2
}
fn default_in_flight() -> usize {
    4
}
fn default_temperature() -> f64 {
    0.7
}

const TOPIC_PROMPT: &str = include_str!("../assets/prompts/topic.txt");
const HEADER_PROMPT: &str = include_str!("../assets/prompts/header_fill.txt");
const BODY_PROMPT: &str = include_str!("../assets/prompts/body_fill.txt");

/// Counting gate bounding concurrent transport calls.
struct Gate {
    max: usize,
    state: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(max: usize) -> Gate {
        Gate { max: max.max(1), state: Mutex::new(0), cv: Condvar::new() }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut in_flight = self.state.lock().expect("gate poisoned");
        while *in_flight >= self.max {
            in_flight = self.cv.wait(in_flight).expect("gate poisoned");
        }
        *in_flight += 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut in_flight = self.gate.state.lock().expect("gate poisoned");
        *in_flight -= 1;
        self.gate.cv.notify_one();
    }
}

/// Model-backed provider. All three operations are one prompt each; replies
/// must be JSON (code fences tolerated) matching a fixed shape.
pub struct LlmProvider {
    config: LlmProviderConfig,
    transport: Box<dyn Transport>,
    transcript: Option<std::sync::Arc<Transcript>>,
    gate: Gate,
}

impl LlmProvider {
    pub fn new(config: LlmProviderConfig, transport: Box<dyn Transport>) -> LlmProvider {
        let gate = Gate::new(config.max_inflight);
        LlmProvider { config, transport, transcript: None, gate }
    }

    pub fn over_http(config: LlmProviderConfig) -> LlmProvider {
        let transport = HttpTransport::new(&config.endpoint, &config.api_key_env, config.timeout_ms, config.max_retries);
        LlmProvider::new(config, Box::new(transport))
    }

    /// Record every exchange into `transcript` (shared, append-only).
    pub fn with_transcript(mut self, transcript: std::sync::Arc<Transcript>) -> LlmProvider {
        self.transcript = Some(transcript);
        self
    }

    fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        })
    }

    /// One round trip: build request, send under the gate, record, and
    /// extract the assistant message text.
    fn call(&self, prompt: &str) -> Result<String, InfillError> {
        let request = self.request_body(prompt);
        let response = {
            let _slot = self.gate.acquire();
            self.transport.send(&request)?
        };
        if let Some(t) = &self.transcript {
            t.record(request, response.clone());
        }
        let content = response["choices"][0]["message"]["content"].as_str().ok_or_else(|| {
            InfillError::ResponseFormat { detail: "response lacks choices[0].message.content".to_string() }
        })?;
        Ok(content.to_string())
    }

    fn call_json(&self, prompt: &str) -> Result<Value, InfillError> {
        let content = self.call(prompt)?;
        let stripped = strip_code_fences(&content);
        serde_json::from_str(stripped).map_err(|e| InfillError::ResponseFormat {
            detail: format!("content is not JSON: {e}"),
        })
    }
}

/// Drops a leading ```/```json fence and its closing fence, if present.
fn strip_code_fences(content: &str) -> &str {
    let trimmed = content.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    let rest = rest.strip_suffix("```").unwrap_or(rest);
    rest.trim()
}

fn language_name(language: Language) -> &'static str {
    match language {
        Language::En => "English",
        Language::Zh => "Chinese",
    }
}

impl ContentProvider for LlmProvider {
    fn topics(&self, domain: &str, language: Language, used: &[String], n: usize) -> Result<Vec<String>, InfillError> {
        let mut collected: Vec<String> = Vec::with_capacity(n);
        // Re-ask a bounded number of times; each round's request differs
        // because the used-topics list grows.
        for _ in 0..3 {
            let mut avoid: Vec<String> = used.to_vec();
            avoid.extend(collected.iter().cloned());
            let prompt = TOPIC_PROMPT
                .replace("{domain}", domain)
                .replace("{language}", language_name(language))
                .replace("{count}", &(n - collected.len()).to_string())
                .replace("{used_topics}", &serde_json::to_string(&avoid).expect("strings serialize"));
            let value = self.call_json(&prompt)?;
            let phrases = value["phrase"].as_array().ok_or_else(|| InfillError::ResponseFormat {
                detail: "topic response lacks a \"phrase\" array".to_string(),
            })?;
            for p in phrases {
                let Some(s) = p.as_str() else { continue };
                let s = s.trim().to_string();
                if !s.is_empty() && !avoid.contains(&s) && !collected.contains(&s) {
                    collected.push(s);
                    if collected.len() == n {
                        return Ok(collected);
                    }
                }
            }
        }
        if collected.is_empty() {
            return Err(InfillError::ResponseFormat { detail: "no usable topics after 3 rounds".to_string() });
        }
        Ok(collected)
    }

    fn fill_headers(&self, html: &str, topic: &str, domain: &str, language: Language) -> Result<String, InfillError> {
        let parsed = parse_document(html).map_err(|e| invalid(format!("skeleton does not parse: {e}")))?;
        let table = &html[parsed.table_range.clone()];
        let prompt = HEADER_PROMPT
            .replace("{topic}", topic)
            .replace("{domain}", domain)
            .replace("{language}", language_name(language))
            .replace("{entities}", &entities(topic).join(", "))
            .replace("{html}", table);
        let value = self.call_json(&prompt)?;
        let returned = value["html"].as_str().ok_or_else(|| InfillError::ResponseFormat {
            detail: "header fill response lacks an \"html\" string".to_string(),
        })?;
        let candidate = replace_table(html, &parsed, returned.trim());
        verify_structure(html, &candidate)?;
        Ok(candidate)
    }

    fn fill_bodies(
        &self,
        html: &str,
        topic: &str,
        domain: &str,
        language: Language,
        n_variants: usize,
    ) -> Result<Vec<String>, InfillError> {
        let parsed = parse_document(html).map_err(|e| invalid(format!("input does not parse: {e}")))?;
        let table = &html[parsed.table_range.clone()];
        let prompt = BODY_PROMPT
            .replace("{topic}", topic)
            .replace("{domain}", domain)
            .replace("{language}", language_name(language))
            .replace("{count}", &n_variants.to_string())
            .replace("{html}", table);
        let value = self.call_json(&prompt)?;
        let arr = value["html"].as_array().ok_or_else(|| InfillError::ResponseFormat {
            detail: "body fill response lacks an \"html\" array".to_string(),
        })?;
        if arr.len() != n_variants {
            return Err(InfillError::ResponseFormat {
                detail: format!("asked for {n_variants} variants, got {}", arr.len()),
            });
        }
        let mut out = Vec::with_capacity(arr.len());
        for item in arr {
            let returned = item.as_str().ok_or_else(|| InfillError::ResponseFormat {
                detail: "body fill variant is not a string".to_string(),
            })?;
            let candidate = replace_table(html, &parsed, returned.trim());
            verify_structure(html, &candidate)?;
            out.push(candidate);
        }
        Ok(out)
    }
}

const RANKING_PROMPT: &str = include_str!("../assets/prompts/ranking.txt");

/// Model-backed quality ranker. One prompt scores all three aspects; the
/// trio is cached per table so the checker's separate topic and semantics
/// lookups cost a single request. The ranking trait is infallible, so a
/// failed call logs a warning and scores the pessimistic 1, which rejects
/// the candidate rather than letting an unscored table through.
pub struct LlmRanker {
    provider: LlmProvider,
    cache: Mutex<std::collections::HashMap<String, (u8, u8, u8)>>,
}

impl LlmRanker {
    pub fn new(provider: LlmProvider) -> LlmRanker {
        LlmRanker { provider, cache: Mutex::new(std::collections::HashMap::new()) }
    }

    fn rank_trio(&self, grid: &crate::model::TableGrid, topic: &str) -> (u8, u8, u8) {
        let table = crate::html::table_markup(grid);
        if let Some(hit) = self.cache.lock().expect("ranker cache poisoned").get(&table) {
            return *hit;
        }
        let prompt = RANKING_PROMPT.replace("{topic}", topic).replace("{html}", &table);
        let trio = match self.provider.call_json(&prompt) {
            Ok(value) => {
                let pick = |key: &str| {
                    value[key].as_u64().map(|v| v.clamp(1, 5) as u8).unwrap_or_else(|| {
                        log::warn!("ranking response lacks an integer {key:?}; scoring 1");
                        1
                    })
                };
                (pick("structure"), pick("topic"), pick("semantics"))
            }
            Err(e) => {
                log::warn!("ranking call failed ({e}); scoring 1");
                (1, 1, 1)
            }
        };
        self.cache.lock().expect("ranker cache poisoned").insert(table, trio);
        trio
    }
}

impl crate::checker::QualityRanker for LlmRanker {
    fn topic_rank(&self, grid: &crate::model::TableGrid, topic: &str) -> u8 {
        self.rank_trio(grid, topic).1
    }

    fn semantic_rank(&self, grid: &crate::model::TableGrid) -> u8 {
        // Topic-independent aspect; an uncached lookup states no topic.
        self.rank_trio(grid, "(not specified)").2
    }
}
