//! The report every command produces, and its three renderings.
//!
//! Numbers are stored in the requested units. JSON uses the shortest decimal
//! that round-trips to the same `f64`; CSV uses 17 significant digits. Both
//! parse back to the exact values.

use std::fmt::Write as _;
use std::str::FromStr;

use entropy_lab::dynent::{EntropySequence, RateEstimate};
use serde::{Deserialize, Serialize};

pub const TOOL: &str = "entropy-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    /// Converts from nats; negative zero is printed as zero.
    pub fn scale(self, nats: f64) -> f64 {
        let v = match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        };
        v + 0.0
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

impl FromStr for Units {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nats" => Ok(Units::Nats),
            "bits" => Ok(Units::Bits),
            other => Err(format!("unknown units {other:?} (expected nats or bits)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (expected table, csv or json)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub system: String,
    #[serde(default)]
    pub partitions: Vec<String>,
    pub units: Units,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmax: Option<usize>,
    pub word_cap: usize,
    pub afl_dim_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub states: Vec<String>,
    pub stationary: Vec<f64>,
    pub deterministic: bool,
    /// `S(mu)` in the report units.
    pub stationary_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub path: String,
    pub labels: Vec<String>,
    pub sharp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub depth: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub kind: String,
    pub partition: String,
    pub values: Vec<f64>,
    pub increments: Vec<f64>,
    pub ratios: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationReport>,
}

impl SequenceReport {
    pub fn new(seq: &EntropySequence, partition: &str, units: Units) -> Self {
        let scale = |v: Vec<f64>| v.into_iter().map(|x| units.scale(x)).collect();
        Self {
            kind: seq.kind.as_str().to_string(),
            partition: partition.to_string(),
            values: scale(seq.values.clone()),
            increments: scale(seq.increments()),
            ratios: scale(seq.ratios()),
            truncation: seq.truncation.as_ref().map(|t| TruncationReport {
                depth: t.depth,
                reason: t.reason.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub kind: String,
    pub partition: String,
    pub nmax: usize,
    pub last_increment: f64,
    pub last_ratio: f64,
}

impl RateReport {
    pub fn new(kind: &str, partition: &str, r: &RateEstimate, units: Units) -> Self {
        Self {
            kind: kind.to_string(),
            partition: partition.to_string(),
            nmax: r.nmax,
            last_increment: units.scale(r.last_increment),
            last_ratio: units.scale(r.last_ratio),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub holds: bool,
    pub tolerance: f64,
    #[serde(default)]
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub index: Vec<usize>,
    pub weight: f64,
    pub component: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub source: String,
    pub value: f64,
    pub shape: Vec<usize>,
    pub entries: Vec<EntryReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CntReport {
    pub arity: usize,
    /// Where each argument partition came from, e.g. `"F"` or `"Theta^1(F)"`.
    pub partition_list: Vec<String>,
    pub best: f64,
    pub witness: WitnessReport,
    pub identifications_evaluated: usize,
    pub identifications_truncated: bool,
    pub negative_identifications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub most_negative: Option<WitnessReport>,
    pub random_evaluated: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordReport {
    pub word: Vec<String>,
    pub count: u64,
    pub empirical: f64,
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub depth: usize,
    pub samples: u64,
    pub block_size: u64,
    pub distinct_words: usize,
    pub tv_distance: f64,
    pub reference_bound: f64,
    pub below_bound: bool,
    pub words: Vec<WordReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupReport {
    pub mode: String,
    pub candidates: usize,
    pub truncated_candidates: usize,
    pub cells: Vec<Vec<String>>,
    pub rate: RateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Config,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub partitions: Vec<PartitionSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequences: Vec<SequenceReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rates: Vec<RateReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<OrderingReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cnt: Option<CntReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup: Option<SupReport>,
}

impl Report {
    pub fn new(command: &str, config: Config) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            command: command.to_string(),
            config,
            system: None,
            partitions: Vec::new(),
            sequences: Vec::new(),
            rates: Vec::new(),
            ordering: None,
            cnt: None,
            sample: None,
            sup: None,
        }
    }

    pub fn is_truncated(&self) -> bool {
        self.sequences.iter().any(|s| s.truncation.is_some())
            || self.sup.as_ref().is_some_and(|s| s.truncated_candidates > 0)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
                s.push('\n');
                s
            }
            Format::Csv => self.render_csv(),
            Format::Table => self.render_table(),
        }
    }

    fn render_csv(&self) -> String {
        let mut out = String::new();
        if let Some(s) = &self.sample {
            out.push_str("word,count,empirical,analytic\n");
            for w in &s.words {
                let _ = writeln!(out, "{},{},{:.16e},{:.16e}", w.word.join(" "), w.count, w.empirical, w.analytic);
            }
        } else if let Some(c) = &self.cnt {
            out.push_str("best,negative_identifications,identifications_evaluated,random_evaluated\n");
            let _ = writeln!(
                out,
                "{:.16e},{},{},{}",
                c.best, c.negative_identifications, c.identifications_evaluated, c.random_evaluated
            );
        } else if let Some(s) = &self.sup {
            out.push_str("cells,last_increment,last_ratio\n");
            let cells: Vec<String> = s.cells.iter().map(|c| c.join(" ")).collect();
            let _ = writeln!(out, "{},{:.16e},{:.16e}", cells.join("|"), s.rate.last_increment, s.rate.last_ratio);
        } else if !self.sequences.is_empty() {
            // a single sequence keeps the bare header; several get key columns
            let multi = self.sequences.len() > 1;
            out.push_str(if multi { "kind,partition,N,s_N,increment,ratio\n" } else { "N,s_N,increment,ratio\n" });
            for seq in &self.sequences {
                for i in 0..seq.values.len() {
                    if multi {
                        let _ = write!(out, "{},{},", seq.kind, seq.partition);
                    }
                    let _ = writeln!(
                        out,
                        "{},{:.16e},{:.16e},{:.16e}",
                        i + 1,
                        seq.values[i],
                        seq.increments[i],
                        seq.ratios[i]
                    );
                }
            }
        }
        out
    }

    fn render_table(&self) -> String {
        let mut out = String::new();
        let units = self.config.units.as_str();
        if let Some(sys) = &self.system {
            let _ = writeln!(out, "states:        {}", sys.states.join(", "));
            let mu: Vec<String> = sys.stationary.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(out, "stationary:    {}", mu.join(", "));
            let _ = writeln!(out, "deterministic: {}", sys.deterministic);
            let _ = writeln!(out, "S(mu):         {:.9} {units}", sys.stationary_entropy);
        }
        for p in &self.partitions {
            let _ = writeln!(
                out,
                "partition {}: {} outcomes ({}), {}",
                p.path,
                p.labels.len(),
                p.labels.join(", "),
                if p.sharp { "sharp" } else { "unsharp" }
            );
        }
        let kinds: Vec<&SequenceReport> = self.sequences.iter().collect();
        if self.command == "compare" || self.command == "report" {
            for group in kinds.chunk_by(|a, b| a.partition == b.partition) {
                let _ = writeln!(out, "partition {} (s_N in {units})", group[0].partition);
                let _ = write!(out, "{:>4}", "N");
                for s in group {
                    let _ = write!(out, " {:>16}", s.kind.to_uppercase());
                }
                out.push('\n');
                let rows = group.iter().map(|s| s.values.len()).max().unwrap_or(0);
                for i in 0..rows {
                    let _ = write!(out, "{:>4}", i + 1);
                    for s in group {
                        match s.values.get(i) {
                            Some(v) => {
                                let _ = write!(out, " {v:>16.9}");
                            }
                            None => {
                                let _ = write!(out, " {:>16}", "-");
                            }
                        }
                    }
                    out.push('\n');
                }
            }
        } else {
            for s in &kinds {
                let _ = writeln!(out, "{} on {} ({units})", s.kind.to_uppercase(), s.partition);
                let _ = writeln!(out, "{:>4} {:>16} {:>16} {:>16}", "N", "s_N", "d_N", "s_N/N");
                for i in 0..s.values.len() {
                    let _ = writeln!(
                        out,
                        "{:>4} {:>16.9} {:>16.9} {:>16.9}",
                        i + 1,
                        s.values[i],
                        s.increments[i],
                        s.ratios[i]
                    );
                }
            }
        }
        for s in &self.sequences {
            if let Some(t) = &s.truncation {
                let _ = writeln!(out, "{} truncated at N={}: {}", s.kind.to_uppercase(), t.depth, t.reason);
            }
        }
        for r in &self.rates {
            let _ = writeln!(
                out,
                "rate {} on {}: last increment {:.9}, last ratio {:.9} {units} (N={})",
                r.kind.to_uppercase(),
                r.partition,
                r.last_increment,
                r.last_ratio,
                r.nmax
            );
        }
        if let Some(o) = &self.ordering {
            if o.holds {
                let _ = writeln!(out, "ordering HUD <= MAK, HUD <= AFL <= KOW: holds");
            } else {
                let _ = writeln!(out, "ordering HUD <= MAK, HUD <= AFL <= KOW: VIOLATED");
                for v in &o.violations {
                    let _ = writeln!(out, "  {v}");
                }
            }
        }
        if let Some(c) = &self.cnt {
            let _ = writeln!(out, "partitions:                {}", c.partition_list.join(", "));
            let _ = writeln!(out, "best value:                {:.9} {units}", c.best);
            let _ = writeln!(
                out,
                "witness:                   {} decomposition, shape {:?}, {} entries",
                c.witness.source,
                c.witness.shape,
                c.witness.entries.len()
            );
            let _ = writeln!(
                out,
                "identifications:           {}{}",
                c.identifications_evaluated,
                if c.identifications_truncated { " (truncated at cap)" } else { "" }
            );
            let _ = writeln!(out, "negative identifications:  {}", c.negative_identifications);
            if let Some(m) = &c.most_negative {
                let _ = writeln!(out, "most negative value:       {:.9} {units}", m.value);
            }
            let _ = writeln!(out, "random decompositions:     {}", c.random_evaluated);
            if let Some(v) = c.closed_form {
                let _ = writeln!(out, "closed form:               {v:.9} {units}");
            }
        }
        if let Some(s) = &self.sample {
            let _ = writeln!(out, "{:>12} {:>10} {:>12} {:>12}", "word", "count", "empirical", "analytic");
            for w in &s.words {
                let _ = writeln!(
                    out,
                    "{:>12} {:>10} {:>12.6} {:>12.6}",
                    w.word.join(" "),
                    w.count,
                    w.empirical,
                    w.analytic
                );
            }
            let _ = writeln!(out, "samples: {}, distinct words: {}", s.samples, s.distinct_words);
            let _ = writeln!(
                out,
                "TV distance {:.6e} vs reference bound {:.6e}: {}",
                s.tv_distance,
                s.reference_bound,
                if s.below_bound { "below" } else { "ABOVE" }
            );
        }
        if let Some(s) = &self.sup {
            let cells: Vec<String> = s.cells.iter().map(|c| format!("{{{}}}", c.join(", "))).collect();
            let _ = writeln!(out, "mode: {}, candidates: {}", s.mode, s.candidates);
            let _ = writeln!(out, "best sharp partition: {}", cells.join(" "));
            let _ = writeln!(
                out,
                "{} rate: last increment {:.9}, last ratio {:.9} {units} (N={})",
                s.rate.kind.to_uppercase(),
                s.rate.last_increment,
                s.rate.last_ratio,
                s.rate.nmax
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> Report {
        let mut r = Report::new("rate", Config { system: "s.json".into(), word_cap: 16, afl_dim_cap: 8, ..Config::default() });
        r.sequences.push(SequenceReport {
            kind: "kow".into(),
            partition: "p.json".into(),
            values: vec![0.1 + 0.2, std::f64::consts::LN_2, 1.0 / 3.0],
            increments: vec![0.3, 0.39, -1e-300],
            ratios: vec![f64::MIN_POSITIVE, 1e300, 2.0_f64.sqrt()],
            truncation: None,
        });
        r
    }

    #[test]
    fn json_round_trip_is_exact() {
        let r = sample_report();
        let text = r.render(Format::Json);
        let back: Report = serde_json::from_str(&text).unwrap();
        assert_eq!(r, back);
        assert_eq!(text, back.render(Format::Json));
    }

    #[test]
    fn csv_is_exact() {
        let r = sample_report();
        let csv = r.render(Format::Csv);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("N,s_N,increment,ratio"));
        for (i, line) in lines.enumerate() {
            let cols: Vec<f64> = line.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
            let s = &r.sequences[0];
            assert_eq!(cols, vec![s.values[i], s.increments[i], s.ratios[i]]);
        }
    }

    #[test]
    fn bits() {
        assert!((Units::Bits.scale(std::f64::consts::LN_2) - 1.0).abs() < 1e-15);
        assert_eq!("bits".parse::<Units>().unwrap(), Units::Bits);
        assert!("bans".parse::<Units>().is_err());
    }
}
