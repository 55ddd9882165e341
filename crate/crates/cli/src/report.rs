use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smroot::isolator::{Config, IsolationResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub parse_ms: f64,
    pub isolate_ms: f64,
    pub postprocess_ms: f64,
}

/// Everything one `isolate` run produces, as written to stdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    /// sha256 of the input file bytes.
    pub input_digest: String,
    pub config: Config,
    #[serde(flatten)]
    pub result: IsolationResult,
    pub timings: Timings,
}

impl RunReport {
    pub fn new(input: &[u8], config: Config, result: IsolationResult, timings: Timings) -> Self {
        RunReport {
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_digest: digest(input),
            config,
            result,
            timings,
        }
    }

    pub fn text(&self, names: &[String]) -> String {
        let mut s = String::new();
        let r = &self.result;
        s.push_str(&format!(
            "certified {}  suspected {}  refined {} ({} certified)  boxes {}  {:.1} ms{}\n",
            r.certified.len(),
            r.suspected.len(),
            r.refined.len(),
            r.refined.iter().filter(|p| p.certified).count(),
            r.stats.boxes_processed,
            r.stats.wall_time_ms + r.stats.postprocess_time_ms,
            if r.complete { "" } else { "  (incomplete)" },
        ));
        for b in &r.certified {
            s.push_str(&format!("root  {b}\n"));
        }
        for b in &r.suspected {
            s.push_str(&format!("suspect  {b}\n"));
        }
        for p in &r.refined {
            let coords: Vec<String> = names
                .iter()
                .zip(&p.point)
                .map(|(n, v)| format!("{n}={v}"))
                .collect();
            s.push_str(&format!(
                "refined  {}  residual {:e}{}\n",
                coords.join(" "),
                p.residual,
                if p.certified { "  certified" } else { "" }
            ));
        }
        for w in &r.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }
}

pub fn digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
