//! Quantitative analysis of the necessity user study: correlations, Friedman
//! tests over content rankings, driver typing and seat-preference transitions.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

/// Significance level used for the content-preference tests.
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Number of explanation content formats ranked per scenario.
pub const CONTENT_FORMATS: [&str; 4] =
    ["first_action_reason", "third_action_reason", "first_action", "third_action"];
/// Speeds strictly above this on a 30 mph road mark a speeding driver.
pub const SPEEDING_MPH: f64 = 35.0;
/// Largest subject count for which the exact Friedman null is enumerated.
pub const EXACT_FRIEDMAN_MAX_SUBJECTS: usize = 10;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} observations, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("correlation undefined: {0} series is constant")]
    Constant(&'static str),
    #[error("binary series has only one class")]
    SingleClass,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("row {row} is not a valid ranking: {detail}")]
    MalformedRanking { row: usize, detail: String },
    #[error("every subject tied every treatment; statistic undefined")]
    AllTied,
    #[error("exact p-value needs untied rankings, n <= {EXACT_FRIEDMAN_MAX_SUBJECTS} and k <= 5")]
    ExactUnavailable,
    #[error("participant {0}: incomplete response, missing {1}")]
    IncompleteResponse(String, String),
    #[error("unknown seat code `{0}`")]
    UnknownSeat(String),
    #[error("unknown seat-change reason `{0}`")]
    UnknownReason(String),
    #[error("csv {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("csv {path}: {detail}")]
    Schema { path: PathBuf, detail: String },
}

// --- correlation ------------------------------------------------------------

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew { need: 3, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite("x"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite("y"));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Product-moment correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::Constant("x"));
    }
    if syy == 0.0 {
        return Err(StatsError::Constant("y"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn code01(b: &[bool]) -> Vec<f64> {
    b.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect()
}

/// Point-biserial correlation via group means:
/// `(mean_1 - mean_0) / s_y * sqrt(p * q)` with the population deviation `s_y`.
pub fn point_biserial(b: &[bool], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(&code01(b), y)?;
    let n1 = b.iter().filter(|&&x| x).count();
    let n0 = b.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(StatsError::SingleClass);
    }
    let n = y.len() as f64;
    let my = mean(y);
    let ss = y.iter().map(|v| (v - my) * (v - my)).sum::<f64>();
    if ss == 0.0 {
        return Err(StatsError::Constant("y"));
    }
    let sd = (ss / n).sqrt();
    let (mut s1, mut s0) = (0.0, 0.0);
    for (&flag, &v) in b.iter().zip(y) {
        if flag {
            s1 += v;
        } else {
            s0 += v;
        }
    }
    let m1 = s1 / n1 as f64;
    let m0 = s0 / n0 as f64;
    let p = n1 as f64 / n;
    Ok(((m1 - m0) / sd * (p * (1.0 - p)).sqrt()).clamp(-1.0, 1.0))
}

// --- Friedman ---------------------------------------------------------------

/// Ranks starting at 1, ties sharing the mean of the positions they span.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PValueMethod {
    #[default]
    ChiSquare,
    /// Exact null distribution of the rank sums, enumerated subject by subject.
    ExactPermutation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub method: PValueMethod,
    /// Column rank sums.
    pub rank_sums: Vec<f64>,
}

fn validate_rank_table(table: &[Vec<f64>]) -> Result<(usize, usize), StatsError> {
    let n = table.len();
    if n < 2 {
        return Err(StatsError::TooFew { need: 2, got: n });
    }
    let k = table[0].len();
    if k < 3 {
        return Err(StatsError::MalformedRanking { row: 0, detail: format!("{k} treatments, need 3") });
    }
    for (i, row) in table.iter().enumerate() {
        if row.len() != k {
            return Err(StatsError::MalformedRanking {
                row: i,
                detail: format!("{} entries, expected {k}", row.len()),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::MalformedRanking { row: i, detail: "non-finite rank".into() });
        }
        let expected = midranks(row);
        if row.iter().zip(&expected).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(StatsError::MalformedRanking {
                row: i,
                detail: format!("{row:?} is not a mid-ranked ordering of 1..={k}"),
            });
        }
    }
    Ok((n, k))
}

fn friedman_from_sums(rank_sums: &[f64], n: usize, tie_term: f64) -> f64 {
    let k = rank_sums.len() as f64;
    let n = n as f64;
    let ssum: f64 = rank_sums.iter().map(|r| r * r).sum();
    let uncorrected = 12.0 / (n * k * (k + 1.0)) * ssum - 3.0 * n * (k + 1.0);
    let correction = 1.0 - tie_term / (n * (k * k * k - k));
    uncorrected / correction
}

/// Friedman test over an `n subjects x k treatments` table of rankings.
pub fn friedman(table: &[Vec<f64>], alpha: f64) -> Result<FriedmanResult, StatsError> {
    friedman_with(table, alpha, PValueMethod::ChiSquare)
}

pub fn friedman_with(
    table: &[Vec<f64>],
    alpha: f64,
    method: PValueMethod,
) -> Result<FriedmanResult, StatsError> {
    let (n, k) = validate_rank_table(table)?;
    let mut rank_sums = vec![0.0; k];
    let mut tie_term = 0.0;
    for row in table {
        for (s, r) in rank_sums.iter_mut().zip(row) {
            *s += r;
        }
        let mut sorted = row.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < k {
            let mut j = i;
            while j + 1 < k && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }
    if (tie_term - n as f64 * ((k * k * k - k) as f64)).abs() < 1e-9 {
        return Err(StatsError::AllTied);
    }
    let statistic = friedman_from_sums(&rank_sums, n, tie_term).max(0.0);
    let dof = k - 1;
    let p_value = match method {
        PValueMethod::ChiSquare => {
            let chi = ChiSquared::new(dof as f64).expect("dof >= 2");
            chi.sf(statistic)
        }
        PValueMethod::ExactPermutation => {
            if n > EXACT_FRIEDMAN_MAX_SUBJECTS || k > 5 || tie_term > 0.0 {
                return Err(StatsError::ExactUnavailable);
            }
            exact_friedman_p(n, k, statistic)
        }
    };
    Ok(FriedmanResult { statistic, dof, p_value, alpha, reject: p_value < alpha, method, rank_sums })
}

fn permutations(k: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur: Vec<u8> = (1..=k as u8).collect();
    fn heap(m: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if m == 1 {
            out.push(cur.clone());
            return;
        }
        for i in 0..m {
            heap(m - 1, cur, out);
            let j = if m.is_multiple_of(2) { i } else { 0 };
            cur.swap(j, m - 1);
        }
    }
    heap(k, &mut cur, &mut out);
    out
}

/// P(statistic >= observed) when every subject's ranking is an independent
/// uniform permutation.
fn exact_friedman_p(n: usize, k: usize, observed: f64) -> f64 {
    let perms = permutations(k);
    let w = 1.0 / perms.len() as f64;
    let pack = |sums: &[u16]| sums.iter().fold(0u64, |acc, &s| (acc << 12) | s as u64);
    let mut dist: HashMap<u64, (Vec<u16>, f64)> = HashMap::new();
    dist.insert(0, (vec![0; k], 1.0));
    for _ in 0..n {
        let mut next: HashMap<u64, (Vec<u16>, f64)> = HashMap::with_capacity(dist.len() * 4);
        for (sums, p) in dist.values() {
            for perm in &perms {
                let s: Vec<u16> = sums.iter().zip(perm).map(|(a, &b)| a + b as u16).collect();
                let e = next.entry(pack(&s)).or_insert_with(|| (s, 0.0));
                e.1 += p * w;
            }
        }
        dist = next;
    }
    let mut tail = 0.0;
    for (sums, p) in dist.values() {
        let r: Vec<f64> = sums.iter().map(|&s| s as f64).collect();
        if friedman_from_sums(&r, n, 0.0) >= observed - 1e-9 {
            tail += p;
        }
    }
    tail.min(1.0)
}

// --- driver typing ----------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DriverAnswers {
    /// Usual speed (mph) on a road limited to 30 mph.
    pub usual_speed_mph: Option<f64>,
    pub self_described_aggressive: Option<bool>,
    pub frequent_lane_change: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriverCondition {
    Speeding,
    SelfDescribed,
    FrequentLaneChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriverKind {
    Aggressive,
    Cautious,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriverType {
    pub participant_id: String,
    pub kind: DriverKind,
    pub triggered_conditions: Vec<DriverCondition>,
}

/// Aggressive iff any of: speed above 35 mph on a 30 mph road, self-described
/// aggressive, frequent unnecessary lane changes.
pub fn classify_driver(participant_id: &str, answers: &DriverAnswers) -> Result<DriverType, StatsError> {
    let missing: Vec<&str> = [
        ("usual_speed_mph", answers.usual_speed_mph.is_none()),
        ("self_described_aggressive", answers.self_described_aggressive.is_none()),
        ("frequent_lane_change", answers.frequent_lane_change.is_none()),
    ]
    .into_iter()
    .filter_map(|(name, absent)| absent.then_some(name))
    .collect();
    if !missing.is_empty() {
        return Err(StatsError::IncompleteResponse(participant_id.into(), missing.join(", ")));
    }
    let mut triggered = Vec::new();
    if answers.usual_speed_mph.unwrap() > SPEEDING_MPH {
        triggered.push(DriverCondition::Speeding);
    }
    if answers.self_described_aggressive.unwrap() {
        triggered.push(DriverCondition::SelfDescribed);
    }
    if answers.frequent_lane_change.unwrap() {
        triggered.push(DriverCondition::FrequentLaneChange);
    }
    let kind = if triggered.is_empty() { DriverKind::Cautious } else { DriverKind::Aggressive };
    Ok(DriverType { participant_id: participant_id.into(), kind, triggered_conditions: triggered })
}

// --- seats ------------------------------------------------------------------

/// Seat positions as labelled in the questionnaire figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Seat {
    /// Front, driver side.
    A,
    /// Back, driver side.
    B,
    /// Front, passenger side.
    C,
    /// Back, passenger side.
    D,
}

impl FromStr for Seat {
    type Err = StatsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Seat::A),
            "B" | "b" => Ok(Seat::B),
            "C" | "c" => Ok(Seat::C),
            "D" | "d" => Ok(Seat::D),
            other => Err(StatsError::UnknownSeat(other.into())),
        }
    }
}

/// Both back seats collapse into one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeatClass {
    FrontDriver,
    FrontPassenger,
    Back,
}

impl SeatClass {
    pub const ALL: [SeatClass; 3] = [SeatClass::FrontDriver, SeatClass::FrontPassenger, SeatClass::Back];

    fn index(self) -> usize {
        self as usize
    }
}

impl From<Seat> for SeatClass {
    fn from(s: Seat) -> Self {
        match s {
            Seat::A => SeatClass::FrontDriver,
            Seat::C => SeatClass::FrontPassenger,
            Seat::B | Seat::D => SeatClass::Back,
        }
    }
}

impl fmt::Display for SeatClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeatClass::FrontDriver => "front-driver",
            SeatClass::FrontPassenger => "front-passenger",
            SeatClass::Back => "back",
        })
    }
}

/// Stated reason for changing seat between two vehicle conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeatReason {
    /// More comfortable (relieved).
    Comfort,
    /// Wants to be able to take over (anxious).
    Control,
    /// Back seats are safer (anxious).
    Safety,
}

impl SeatReason {
    pub fn is_relieved(self) -> bool {
        matches!(self, SeatReason::Comfort)
    }
}

impl FromStr for SeatReason {
    type Err = StatsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "comfort" => Ok(SeatReason::Comfort),
            "control" => Ok(SeatReason::Control),
            "safety" => Ok(SeatReason::Safety),
            other => Err(StatsError::UnknownReason(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionPair {
    OrdinaryToAv,
    AvToAvExplained,
    OrdinaryToAvExplained,
}

impl ConditionPair {
    pub const ALL: [ConditionPair; 3] =
        [ConditionPair::OrdinaryToAv, ConditionPair::AvToAvExplained, ConditionPair::OrdinaryToAvExplained];
}

impl fmt::Display for ConditionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionPair::OrdinaryToAv => "ordinary -> AV",
            ConditionPair::AvToAvExplained => "AV -> AV with explanations",
            ConditionPair::OrdinaryToAvExplained => "ordinary -> AV with explanations",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub participant_id: String,
    pub driver: DriverAnswers,
    pub motion_sickness: Option<bool>,
    pub seat_ordinary: Option<Seat>,
    pub seat_av: Option<Seat>,
    pub seat_av_explained: Option<Seat>,
    /// Reason for moving between ordinary and AV (movers only).
    pub reason_av: Option<SeatReason>,
    /// Reason for moving between AV and AV with explanations (movers only).
    pub reason_av_explained: Option<SeatReason>,
    /// Reason for moving between ordinary and AV with explanations, if asked.
    pub reason_ordinary_av_explained: Option<SeatReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionMatrix {
    pub pair: ConditionPair,
    /// `counts[from][to]` over [`SeatClass::ALL`].
    pub counts: [[u32; 3]; 3],
    pub movers: u32,
    pub relieved: u32,
    pub anxious: u32,
    /// Movers with no stated reason.
    pub untagged: u32,
}

impl TransitionMatrix {
    pub fn row_stochastic(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in self.counts.iter().enumerate() {
            let total: u32 = row.iter().sum();
            if total > 0 {
                for c in 0..3 {
                    out[r][c] = row[c] as f64 / total as f64;
                }
            }
        }
        out
    }

    pub fn relieved_fraction(&self) -> Option<f64> {
        let tagged = self.relieved + self.anxious;
        (tagged > 0).then(|| self.relieved as f64 / tagged as f64)
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().flatten().sum()
    }
}

pub fn seat_transitions(participants: &[Participant]) -> Result<Vec<TransitionMatrix>, StatsError> {
    let mut out: Vec<TransitionMatrix> = ConditionPair::ALL
        .iter()
        .map(|&pair| TransitionMatrix { pair, counts: [[0; 3]; 3], movers: 0, relieved: 0, anxious: 0, untagged: 0 })
        .collect();
    for p in participants {
        let need = |s: Option<Seat>, name: &str| {
            s.ok_or_else(|| StatsError::IncompleteResponse(p.participant_id.clone(), name.into()))
        };
        let ordinary = SeatClass::from(need(p.seat_ordinary, "seat_ordinary")?);
        let av = SeatClass::from(need(p.seat_av, "seat_av")?);
        let explained = SeatClass::from(need(p.seat_av_explained, "seat_av_explained")?);
        let legs = [
            (ordinary, av, p.reason_av),
            (av, explained, p.reason_av_explained),
            (ordinary, explained, p.reason_ordinary_av_explained),
        ];
        for (m, (from, to, reason)) in out.iter_mut().zip(legs) {
            m.counts[from.index()][to.index()] += 1;
            if from != to {
                m.movers += 1;
                match reason {
                    Some(r) if r.is_relieved() => m.relieved += 1,
                    Some(_) => m.anxious += 1,
                    None => m.untagged += 1,
                }
            }
        }
    }
    Ok(out)
}

// --- response table ---------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResponse {
    pub participant_id: String,
    pub vid: String,
    /// 1..=10 Likert.
    pub necessity: f64,
    /// 1..=10 Likert.
    pub attention: f64,
    /// Rank given to each entry of [`CONTENT_FORMATS`], mid-ranked on ties.
    pub content_ranking: Vec<f64>,
    pub scenario_flags: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StudyResponseTable {
    pub responses: Vec<ScenarioResponse>,
    pub participants: Vec<Participant>,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" => Some(false),
        _ => None,
    }
}

fn opt(s: Option<&str>) -> Option<&str> {
    s.map(str::trim).filter(|v| !v.is_empty())
}

impl StudyResponseTable {
    /// Reads the per-scenario response CSV and the per-participant CSV.
    ///
    /// Scenario CSV: `participant_id,vid,necessity,attention`, one
    /// `rank_<format>` column per content format and any number of
    /// `flag_<name>` 0/1 columns.
    ///
    /// Participant CSV: `participant_id,usual_speed_mph,self_described_aggressive,
    /// frequent_lane_change,motion_sickness,seat_ordinary,seat_av,seat_av_explained,
    /// reason_av,reason_av_explained[,reason_ordinary_av_explained]`. Empty
    /// cells are missing answers.
    pub fn read_csv(responses: &Path, participants: &Path) -> Result<Self, StatsError> {
        Ok(Self {
            responses: read_responses(responses)?,
            participants: read_participants(participants)?,
        })
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        for (i, r) in self.responses.iter().enumerate() {
            let row = midranks(&r.content_ranking);
            if r.content_ranking.len() != CONTENT_FORMATS.len()
                || row.iter().zip(&r.content_ranking).any(|(a, b)| (a - b).abs() > 1e-9)
            {
                return Err(StatsError::MalformedRanking {
                    row: i,
                    detail: format!("{}/{}: {:?}", r.participant_id, r.vid, r.content_ranking),
                });
            }
            if !(1.0..=10.0).contains(&r.necessity) || !(1.0..=10.0).contains(&r.attention) {
                return Err(StatsError::Schema {
                    path: PathBuf::new(),
                    detail: format!("row {i}: ratings must lie in 1..=10"),
                });
            }
        }
        Ok(())
    }
}

fn schema(path: &Path, detail: impl Into<String>) -> StatsError {
    StatsError::Schema { path: path.into(), detail: detail.into() }
}

fn read_responses(path: &Path) -> Result<Vec<ScenarioResponse>, StatsError> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|source| StatsError::Csv { path: path.into(), source })?;
    let headers = rdr.headers().map_err(|source| StatsError::Csv { path: path.into(), source })?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| schema(path, format!("missing column {name}")));
    let pid = col("participant_id")?;
    let vid = col("vid")?;
    let nec = col("necessity")?;
    let att = col("attention")?;
    let ranks: Vec<usize> = CONTENT_FORMATS
        .iter()
        .map(|f| col(&format!("rank_{f}")))
        .collect::<Result<_, _>>()?;
    let flags: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("flag_").map(|n| (i, n.to_string())))
        .collect();
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| StatsError::Csv { path: path.into(), source })?;
        let num = |i: usize, what: &str| -> Result<f64, StatsError> {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| schema(path, format!("row {}: bad {what}", line + 1)))
        };
        let mut scenario_flags = BTreeMap::new();
        for (i, name) in &flags {
            let v = rec
                .get(*i)
                .and_then(parse_bool)
                .ok_or_else(|| schema(path, format!("row {}: flag_{name} must be 0/1", line + 1)))?;
            scenario_flags.insert(name.clone(), v);
        }
        out.push(ScenarioResponse {
            participant_id: rec.get(pid).unwrap_or_default().trim().into(),
            vid: rec.get(vid).unwrap_or_default().trim().into(),
            necessity: num(nec, "necessity")?,
            attention: num(att, "attention")?,
            content_ranking: ranks
                .iter()
                .zip(CONTENT_FORMATS)
                .map(|(&i, f)| num(i, f))
                .collect::<Result<_, _>>()?,
            scenario_flags,
        });
    }
    Ok(out)
}

fn read_participants(path: &Path) -> Result<Vec<Participant>, StatsError> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|source| StatsError::Csv { path: path.into(), source })?;
    let headers = rdr.headers().map_err(|source| StatsError::Csv { path: path.into(), source })?.clone();
    let idx = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| idx(name).ok_or_else(|| schema(path, format!("missing column {name}")));
    let pid = required("participant_id")?;
    let speed = required("usual_speed_mph")?;
    let selfd = required("self_described_aggressive")?;
    let lane = required("frequent_lane_change")?;
    let sick = required("motion_sickness")?;
    let seats = [required("seat_ordinary")?, required("seat_av")?, required("seat_av_explained")?];
    let reasons = [required("reason_av")?, required("reason_av_explained")?];
    let reason3 = idx("reason_ordinary_av_explained");
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| StatsError::Csv { path: path.into(), source })?;
        let cell = |i: usize| opt(rec.get(i));
        let boolean = |i: usize, what: &str| -> Result<Option<bool>, StatsError> {
            cell(i)
                .map(|s| parse_bool(s).ok_or_else(|| schema(path, format!("row {}: {what} must be 0/1", line + 1))))
                .transpose()
        };
        let seat = |i: usize| cell(i).map(Seat::from_str).transpose();
        let reason = |i: usize| cell(i).map(SeatReason::from_str).transpose();
        out.push(Participant {
            participant_id: rec.get(pid).unwrap_or_default().trim().into(),
            driver: DriverAnswers {
                usual_speed_mph: cell(speed)
                    .map(|s| s.parse::<f64>().map_err(|_| schema(path, format!("row {}: bad usual_speed_mph", line + 1))))
                    .transpose()?,
                self_described_aggressive: boolean(selfd, "self_described_aggressive")?,
                frequent_lane_change: boolean(lane, "frequent_lane_change")?,
            },
            motion_sickness: boolean(sick, "motion_sickness")?,
            seat_ordinary: seat(seats[0])?,
            seat_av: seat(seats[1])?,
            seat_av_explained: seat(seats[2])?,
            reason_av: reason(reasons[0])?,
            reason_av_explained: reason(reasons[1])?,
            reason_ordinary_av_explained: reason3.map(reason).transpose()?.flatten(),
        });
    }
    Ok(out)
}

// --- full report ------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioFriedman {
    pub vid: String,
    pub result: FriedmanResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub n_participants: usize,
    pub n_scenarios: usize,
    pub n_responses: usize,
    pub necessity_attention_pooled: f64,
    /// Both ratings centered on each participant's own mean first.
    pub necessity_attention_centered: f64,
    pub necessity_aggressive: Option<f64>,
    pub necessity_motion_sickness: Option<f64>,
    pub necessity_by_flag: BTreeMap<String, f64>,
    pub aggressive_vs_cautious_mean_gap: Option<f64>,
    pub scenario_mean_range: (f64, f64),
    pub mean_scenario_sd: f64,
    pub drivers: Vec<DriverType>,
    pub friedman: Vec<ScenarioFriedman>,
    pub friedman_rejections: usize,
    pub alpha: f64,
    pub seats: Vec<TransitionMatrix>,
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub fn analyze(table: &StudyResponseTable, alpha: f64) -> Result<StudyReport, StatsError> {
    table.validate()?;
    let rs = &table.responses;
    let necessity: Vec<f64> = rs.iter().map(|r| r.necessity).collect();
    let attention: Vec<f64> = rs.iter().map(|r| r.attention).collect();
    let pooled = pearson(&necessity, &attention)?;

    let mut by_participant: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in rs.iter().enumerate() {
        by_participant.entry(r.participant_id.as_str()).or_default().push(i);
    }
    let mut cn = vec![0.0; rs.len()];
    let mut ca = vec![0.0; rs.len()];
    for idx in by_participant.values() {
        let mn = idx.iter().map(|&i| necessity[i]).sum::<f64>() / idx.len() as f64;
        let ma = idx.iter().map(|&i| attention[i]).sum::<f64>() / idx.len() as f64;
        for &i in idx {
            cn[i] = necessity[i] - mn;
            ca[i] = attention[i] - ma;
        }
    }
    let centered = pearson(&cn, &ca)?;

    let drivers: Vec<DriverType> = table
        .participants
        .iter()
        .map(|p| classify_driver(&p.participant_id, &p.driver))
        .collect::<Result<_, _>>()?;
    let aggressive: HashMap<&str, bool> = drivers
        .iter()
        .map(|d| (d.participant_id.as_str(), d.kind == DriverKind::Aggressive))
        .collect();
    let sick: HashMap<&str, Option<bool>> =
        table.participants.iter().map(|p| (p.participant_id.as_str(), p.motion_sickness)).collect();

    let lookup_flag = |m: &HashMap<&str, bool>| -> Option<Vec<bool>> {
        rs.iter().map(|r| m.get(r.participant_id.as_str()).copied()).collect()
    };
    let optional_pb = |flags: Option<Vec<bool>>| -> Result<Option<f64>, StatsError> {
        match flags {
            None => Ok(None),
            Some(b) => match point_biserial(&b, &necessity) {
                Ok(r) => Ok(Some(r)),
                Err(StatsError::SingleClass) => Ok(None),
                Err(e) => Err(e),
            },
        }
    };
    let aggressive_flags = lookup_flag(&aggressive);
    let necessity_aggressive = optional_pb(aggressive_flags.clone())?;
    let sick_map: HashMap<&str, bool> =
        sick.iter().filter_map(|(k, v)| v.map(|b| (*k, b))).collect();
    let necessity_motion_sickness = optional_pb(lookup_flag(&sick_map))?;

    let aggressive_vs_cautious_mean_gap = aggressive_flags.and_then(|flags| {
        let (mut sa, mut na, mut sc, mut nc) = (0.0, 0usize, 0.0, 0usize);
        for (&f, &v) in flags.iter().zip(&necessity) {
            if f {
                sa += v;
                na += 1;
            } else {
                sc += v;
                nc += 1;
            }
        }
        (na > 0 && nc > 0).then(|| (sa / na as f64) / (sc / nc as f64) - 1.0)
    });

    let mut flag_names: Vec<&String> = rs.iter().flat_map(|r| r.scenario_flags.keys()).collect();
    flag_names.sort();
    flag_names.dedup();
    let mut necessity_by_flag = BTreeMap::new();
    for name in flag_names {
        let flags: Vec<bool> = rs.iter().map(|r| r.scenario_flags.get(name).copied().unwrap_or(false)).collect();
        if let Some(r) = optional_pb(Some(flags))? {
            necessity_by_flag.insert(name.clone(), r);
        }
    }

    let mut by_vid: BTreeMap<&str, Vec<&ScenarioResponse>> = BTreeMap::new();
    for r in rs {
        by_vid.entry(r.vid.as_str()).or_default().push(r);
    }
    let mut scenario_means = Vec::new();
    let mut scenario_sds = Vec::new();
    let mut friedman_results = Vec::new();
    for (vid, group) in &by_vid {
        let ratings: Vec<f64> = group.iter().map(|r| r.necessity).collect();
        scenario_means.push(mean(&ratings));
        scenario_sds.push(sample_sd(&ratings));
        let ranks: Vec<Vec<f64>> = group.iter().map(|r| r.content_ranking.clone()).collect();
        match friedman(&ranks, alpha) {
            Ok(result) => friedman_results.push(ScenarioFriedman { vid: vid.to_string(), result }),
            Err(StatsError::AllTied) | Err(StatsError::TooFew { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let lo = scenario_means.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scenario_means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    Ok(StudyReport {
        n_participants: by_participant.len(),
        n_scenarios: by_vid.len(),
        n_responses: rs.len(),
        necessity_attention_pooled: pooled,
        necessity_attention_centered: centered,
        necessity_aggressive,
        necessity_motion_sickness,
        necessity_by_flag,
        aggressive_vs_cautious_mean_gap,
        scenario_mean_range: (lo, hi),
        mean_scenario_sd: mean(&scenario_sds),
        drivers,
        friedman_rejections: friedman_results.iter().filter(|f| f.result.reject).count(),
        friedman: friedman_results,
        alpha,
        seats: seat_transitions(&table.participants)?,
    })
}

impl StudyReport {
    /// `metric,value` rows for machine consumption.
    pub fn results_rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("n_participants".to_string(), self.n_participants.to_string()),
            ("n_scenarios".into(), self.n_scenarios.to_string()),
            ("pearson_necessity_attention_pooled".into(), self.necessity_attention_pooled.to_string()),
            ("pearson_necessity_attention_centered".into(), self.necessity_attention_centered.to_string()),
        ];
        let optional = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        rows.push(("pointbiserial_necessity_aggressive".into(), optional(self.necessity_aggressive)));
        rows.push(("pointbiserial_necessity_motion_sickness".into(), optional(self.necessity_motion_sickness)));
        for (flag, r) in &self.necessity_by_flag {
            rows.push((format!("pointbiserial_necessity_flag_{flag}"), r.to_string()));
        }
        rows.push(("aggressive_vs_cautious_mean_gap".into(), optional(self.aggressive_vs_cautious_mean_gap)));
        rows.push(("friedman_rejections".into(), self.friedman_rejections.to_string()));
        rows.push(("friedman_tests".into(), self.friedman.len().to_string()));
        for m in &self.seats {
            let key = match m.pair {
                ConditionPair::OrdinaryToAv => "ordinary_av",
                ConditionPair::AvToAvExplained => "av_av_explained",
                ConditionPair::OrdinaryToAvExplained => "ordinary_av_explained",
            };
            rows.push((format!("seat_{key}_movers"), m.movers.to_string()));
            rows.push((format!("seat_{key}_relieved_fraction"), optional(m.relieved_fraction())));
        }
        rows
    }

    pub fn write_results_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "value"])?;
        for (k, v) in self.results_rows() {
            w.write_record([k, v])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# User study analysis\n");
        let _ = writeln!(
            s,
            "{} participants, {} scenarios, {} scenario responses.\n",
            self.n_participants, self.n_scenarios, self.n_responses
        );
        let _ = writeln!(s, "## Correlation with explanation necessity\n");
        let _ = writeln!(s, "| factor | method | r |\n|---|---|---|");
        let _ = writeln!(s, "| attention (pooled) | Pearson | {:.4} |", self.necessity_attention_pooled);
        let _ = writeln!(s, "| attention (participant-centered) | Pearson | {:.4} |", self.necessity_attention_centered);
        let fmt_opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        let _ = writeln!(s, "| aggressive driver | point-biserial | {} |", fmt_opt(self.necessity_aggressive));
        let _ = writeln!(s, "| motion sickness | point-biserial | {} |", fmt_opt(self.necessity_motion_sickness));
        let mut flags: Vec<_> = self.necessity_by_flag.iter().collect();
        flags.sort_by(|a, b| b.1.total_cmp(a.1));
        for (flag, r) in flags {
            let _ = writeln!(s, "| scenario: {flag} | point-biserial | {r:.4} |");
        }
        let aggressive = self.drivers.iter().filter(|d| d.kind == DriverKind::Aggressive).count();
        let _ = writeln!(s, "\n## Driver types\n");
        let _ = writeln!(s, "{aggressive} aggressive, {} cautious.", self.drivers.len() - aggressive);
        if let Some(gap) = self.aggressive_vs_cautious_mean_gap {
            let _ = writeln!(s, "Mean necessity of aggressive drivers relative to cautious: {:+.1}%.", gap * 100.0);
        }
        let _ = writeln!(
            s,
            "Scenario mean necessity ranges {:.2}..{:.2} (1-10 scale); mean per-scenario SD {:.2}.",
            self.scenario_mean_range.0, self.scenario_mean_range.1, self.mean_scenario_sd
        );
        let _ = writeln!(s, "\n## Explanation content preference (Friedman, alpha = {})\n", self.alpha);
        let _ = writeln!(
            s,
            "{} of {} scenarios reject the null of no preference.\n",
            self.friedman_rejections,
            self.friedman.len()
        );
        let _ = writeln!(s, "| vid | chi2_F | dof | p | reject |\n|---|---|---|---|---|");
        for f in &self.friedman {
            let _ = writeln!(
                s,
                "| {} | {:.4} | {} | {:.4} | {} |",
                f.vid, f.result.statistic, f.result.dof, f.result.p_value, f.result.reject
            );
        }
        let _ = writeln!(s, "\n## Seat transitions\n");
        for m in &self.seats {
            let _ = writeln!(s, "### {}\n", m.pair);
            let _ = writeln!(s, "| from \\ to | front-driver | front-passenger | back |\n|---|---|---|---|");
            for (r, class) in SeatClass::ALL.iter().enumerate() {
                let row = m.counts[r];
                let _ = writeln!(s, "| {class} | {} | {} | {} |", row[0], row[1], row[2]);
            }
            let share = m
                .relieved_fraction()
                .map_or("n/a".to_string(), |f| format!("{:.1}%", f * 100.0));
            let _ = writeln!(
                s,
                "\n{} movers: {} relieved, {} anxious, {} without a stated reason (relieved share {share}).\n",
                m.movers, m.relieved, m.anxious, m.untagged
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_perfect_lines() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(pearson(&x, &[3.0; 5]), Err(StatsError::Constant("y"))));
        assert!(matches!(pearson(&x[..2], &y[..2]), Err(StatsError::TooFew { .. })));
    }

    #[test]
    fn point_biserial_median_split() {
        let y = [0.3, 1.2, 2.5, 0.9, 4.4, 3.1, 2.2, 0.1];
        let mut s = y.to_vec();
        s.sort_by(f64::total_cmp);
        let med = (s[3] + s[4]) / 2.0;
        let b: Vec<bool> = y.iter().map(|&v| v > med).collect();
        let r = point_biserial(&b, &y).unwrap();
        assert!((r - pearson(&code01(&b), &y).unwrap()).abs() < 1e-12);
        assert!(matches!(point_biserial(&[true; 8], &y), Err(StatsError::SingleClass)));
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn friedman_identical_rankings_is_maximal() {
        let table = vec![vec![1.0, 2.0, 3.0, 4.0]; 10];
        let r = friedman(&table, DEFAULT_ALPHA).unwrap();
        assert!((r.statistic - 30.0).abs() < 1e-9);
        assert_eq!(r.dof, 3);
        assert!(r.p_value < 1e-5 && r.reject);
    }

    #[test]
    fn friedman_latin_square_is_zero() {
        let table: Vec<Vec<f64>> = (0..12)
            .map(|i| (0..4).map(|j| ((i + j) % 4 + 1) as f64).collect())
            .collect();
        let r = friedman(&table, DEFAULT_ALPHA).unwrap();
        assert!(r.statistic.abs() < 1e-9);
        assert!(!r.reject);
    }

    #[test]
    fn friedman_rejects_malformed_rows() {
        assert!(matches!(
            friedman(&[vec![1.0, 1.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]], 0.05),
            Err(StatsError::MalformedRanking { row: 0, .. })
        ));
        assert!(matches!(
            friedman(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0]], 0.05),
            Err(StatsError::MalformedRanking { row: 1, .. })
        ));
        assert!(friedman(&[vec![1.5, 1.5, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]], 0.05).is_ok());
        assert!(matches!(
            friedman(&[vec![2.0, 2.0, 2.0], vec![2.0, 2.0, 2.0]], 0.05),
            Err(StatsError::AllTied)
        ));
    }

    #[test]
    fn exact_p_matches_brute_force_enumeration() {
        // n = 3, k = 3: all 6^3 tables enumerated directly.
        let perms = permutations(3);
        let table = vec![vec![1.0, 2.0, 3.0], vec![1.0, 3.0, 2.0], vec![1.0, 2.0, 3.0]];
        let obs = friedman(&table, 0.05).unwrap().statistic;
        let mut hits = 0usize;
        let mut total = 0usize;
        for a in &perms {
            for b in &perms {
                for c in &perms {
                    let t: Vec<Vec<f64>> =
                        [a, b, c].iter().map(|p| p.iter().map(|&x| x as f64).collect()).collect();
                    total += 1;
                    if friedman(&t, 0.05).unwrap().statistic >= obs - 1e-9 {
                        hits += 1;
                    }
                }
            }
        }
        let exact = friedman_with(&table, 0.05, PValueMethod::ExactPermutation).unwrap();
        assert!((exact.p_value - hits as f64 / total as f64).abs() < 1e-12);
        let big = vec![vec![1.0, 2.0, 3.0]; 11];
        assert!(matches!(
            friedman_with(&big, 0.05, PValueMethod::ExactPermutation),
            Err(StatsError::ExactUnavailable)
        ));
    }

    #[test]
    fn driver_rules() {
        let a = |speed: f64, s: bool, l: bool| DriverAnswers {
            usual_speed_mph: Some(speed),
            self_described_aggressive: Some(s),
            frequent_lane_change: Some(l),
        };
        let d = classify_driver("p", &a(40.0, false, false)).unwrap();
        assert_eq!(d.kind, DriverKind::Aggressive);
        assert_eq!(d.triggered_conditions, vec![DriverCondition::Speeding]);
        assert_eq!(classify_driver("p", &a(30.0, false, false)).unwrap().kind, DriverKind::Cautious);
        assert_eq!(classify_driver("p", &a(35.0, false, false)).unwrap().kind, DriverKind::Cautious);
        let d = classify_driver("p", &a(20.0, true, true)).unwrap();
        assert_eq!(
            d.triggered_conditions,
            vec![DriverCondition::SelfDescribed, DriverCondition::FrequentLaneChange]
        );
        let err = classify_driver("p9", &DriverAnswers { usual_speed_mph: Some(30.0), ..Default::default() });
        assert!(matches!(err, Err(StatsError::IncompleteResponse(..))));
    }

    fn participant(id: &str, seats: [Seat; 3], r1: Option<SeatReason>, r2: Option<SeatReason>) -> Participant {
        Participant {
            participant_id: id.into(),
            driver: DriverAnswers::default(),
            motion_sickness: None,
            seat_ordinary: Some(seats[0]),
            seat_av: Some(seats[1]),
            seat_av_explained: Some(seats[2]),
            reason_av: r1,
            reason_av_explained: r2,
            reason_ordinary_av_explained: None,
        }
    }

    #[test]
    fn no_movers_is_diagonal() {
        let ps: Vec<_> = [Seat::A, Seat::B, Seat::C, Seat::D]
            .iter()
            .enumerate()
            .map(|(i, &s)| participant(&format!("p{i}"), [s; 3], None, None))
            .collect();
        for m in seat_transitions(&ps).unwrap() {
            assert_eq!(m.movers, 0);
            assert_eq!(m.counts, [[1, 0, 0], [0, 1, 0], [0, 0, 2]]);
            assert_eq!(m.row_stochastic()[2], [0.0, 0.0, 1.0]);
            assert_eq!(m.total(), 4);
        }
    }

    #[test]
    fn relieved_shares() {
        use SeatReason::*;
        // AV -> AV with explanations: 6 movers, 5 relieved -> 83.3%.
        let mut ps = Vec::new();
        for i in 0..5 {
            ps.push(participant(&format!("r{i}"), [Seat::A, Seat::C, Seat::B], Some(Control), Some(Comfort)));
        }
        ps.push(participant("x", [Seat::C, Seat::C, Seat::A], None, Some(Control)));
        ps.push(participant("y", [Seat::C, Seat::C, Seat::C], None, None));
        let m = seat_transitions(&ps).unwrap();
        let av = &m[1];
        assert_eq!(av.movers, 6);
        assert!((av.relieved_fraction().unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(format!("{:.1}", av.relieved_fraction().unwrap() * 100.0), "83.3");

        // Ordinary -> AV: 8 movers, 1 relieved -> 12.5%.
        let mut ps = Vec::new();
        ps.push(participant("c", [Seat::C, Seat::D, Seat::D], Some(Comfort), None));
        for i in 0..7 {
            ps.push(participant(&format!("a{i}"), [Seat::C, Seat::A, Seat::A], Some(Control), None));
        }
        let m = seat_transitions(&ps).unwrap();
        assert_eq!(m[0].movers, 8);
        assert_eq!(m[0].relieved_fraction(), Some(0.125));
        for t in &m {
            assert_eq!(t.total(), 8);
        }
    }

    #[test]
    fn seat_codes() {
        assert_eq!("B".parse::<Seat>().unwrap(), Seat::B);
        assert!(matches!("E".parse::<Seat>(), Err(StatsError::UnknownSeat(_))));
        let mut p = participant("p", [Seat::A; 3], None, None);
        p.seat_av = None;
        assert!(matches!(seat_transitions(&[p]), Err(StatsError::IncompleteResponse(..))));
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(
            pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..30),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            if let Ok(r) = pearson(&x, &y) {
                let xs: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
                prop_assert!((pearson(&xs, &y).unwrap() - r).abs() < 1e-9);
                let neg: Vec<f64> = y.iter().map(|v| -v).collect();
                prop_assert!((pearson(&x, &neg).unwrap() + r).abs() < 1e-12);
            }
        }

        #[test]
        fn friedman_column_permutation_invariant(seed in any::<u64>(), n in 2usize..15) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let table: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let mut r = vec![1.0, 2.0, 3.0, 4.0];
                    r.shuffle(&mut rng);
                    r
                })
                .collect();
            let mut cols = [0, 1, 2, 3];
            cols.shuffle(&mut rng);
            let permuted: Vec<Vec<f64>> = table.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
            let a = friedman(&table, 0.05).unwrap().statistic;
            let b = friedman(&permuted, 0.05).unwrap().statistic;
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
