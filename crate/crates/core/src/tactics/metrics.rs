use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const CSV_HEADER: &str = "scenario,seed,time_to_ball,sprint_time_4m,slalom_time,kick_distance,trace_hash";

/// Outcome of one scenario run. Metrics a scenario does not measure stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub seed: u64,
    pub success: bool,
    pub timed_out: bool,
    pub time_to_ball: Option<f64>,
    pub sprint_time_4m: Option<f64>,
    pub slalom_time: Option<f64>,
    pub kick_distance: Option<f64>,
    pub kick_speed: Option<f64>,
    pub goal_time: Option<f64>,
    pub ball_out_of_bounds: bool,
    /// Simulated seconds at the end of the run.
    pub sim_time: f64,
    pub control_ticks: u64,
    #[serde(serialize_with = "hex_u64", deserialize_with = "parse_hex_u64")]
    pub trace_hash: u64,
}

impl MetricsReport {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed,
            success: false,
            timed_out: false,
            time_to_ball: None,
            sprint_time_4m: None,
            slalom_time: None,
            kick_distance: None,
            kick_speed: None,
            goal_time: None,
            ball_out_of_bounds: false,
            sim_time: 0.0,
            control_ticks: 0,
            trace_hash: 0,
        }
    }

    pub fn failed(&self) -> bool {
        !self.success
    }

    pub fn trace_hash_hex(&self) -> String {
        format!("{:016x}", self.trace_hash)
    }

    /// One CSV line matching [`CSV_HEADER`], without a newline.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.scenario,
            self.seed,
            opt(self.time_to_ball),
            opt(self.sprint_time_4m),
            opt(self.slalom_time),
            opt(self.kick_distance),
            self.trace_hash_hex()
        )
    }
}

fn hex_u64<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{v:016x}"))
}

fn parse_hex_u64<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    let s = String::deserialize(d)?;
    u64::from_str_radix(&s, 16).map_err(serde::de::Error::custom)
}
