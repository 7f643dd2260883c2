//! Instance construction from incident records, real or synthetic.
//!
//! Records are CSV rows with the header
//! `id,timestamp,lat,lon,attendance_s,station_lat,station_lon`: where the
//! incident happened, how long the crew attended (seconds) and the station
//! the first crew came from. Each record becomes one node; agents start at
//! the stations named by the records they serve.

use std::collections::HashSet;
use std::io::Read;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Agent, Instance, Location, ModelError, NodeDemand, PrecedenceDag, Time, TravelModel, EARTH_RADIUS_M};
use crate::rng;
use crate::values::{ValueKind, ValueSpec};

pub const RECORD_HEADER: [&str; 7] = ["id", "timestamp", "lat", "lon", "attendance_s", "station_lat", "station_lon"];

/// Size of the synthetic station pool.
pub const STATION_COUNT: usize = 103;

/// Largest supported node-to-agent ratio.
pub const MAX_RATIO: usize = 20;

/// `[lat_min, lat_max, lon_min, lon_max]` around Greater London.
pub const LONDON_BBOX: [f64; 4] = [51.28, 51.69, -0.51, 0.33];

const STATION_SEED: u64 = 0x4c46_4221;
const TAG_RECORDS: u64 = 1;
const TAG_DEMAND: u64 = 2;
const TAG_VALUES: u64 = 3;
const TAG_TINY: u64 = 4;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("record file is missing column '{0}'")]
    MissingColumn(&'static str),
    #[error("need {needed} records from offset {offset}, only {available} available ({} short)", needed + offset - available)]
    InsufficientRecords {
        needed: usize,
        offset: usize,
        available: usize,
    },
    #[error("invalid scenario parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub id: String,
    pub timestamp: String,
    #[serde(rename = "lat")]
    pub latitude: f64,
    #[serde(rename = "lon")]
    pub longitude: f64,
    /// Attendance time κ in seconds.
    #[serde(rename = "attendance_s")]
    pub attendance_seconds: u64,
    pub station_lat: f64,
    pub station_lon: f64,
}

impl IncidentRecord {
    fn check(&self) -> Result<(), String> {
        let ok = |lat: f64, lon: f64| (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon);
        if !ok(self.latitude, self.longitude) {
            return Err(format!("incident coordinates ({}, {}) out of range", self.latitude, self.longitude));
        }
        if !ok(self.station_lat, self.station_lon) {
            return Err(format!("station coordinates ({}, {}) out of range", self.station_lat, self.station_lon));
        }
        if self.attendance_seconds == 0 {
            return Err("attendance_s must be positive".into());
        }
        Ok(())
    }
}

/// A row that was skipped, with its 1-based line number in the file.
#[derive(Clone, Debug, PartialEq)]
pub struct SkippedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedRecords {
    pub records: Vec<IncidentRecord>,
    pub skipped: Vec<SkippedRow>,
}

/// Reads records in file order. Malformed rows are skipped and reported;
/// a missing column fails the whole file.
pub fn parse_records<R: Read>(reader: R) -> Result<ParsedRecords, ScenarioError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if let Some(col) = RECORD_HEADER.iter().find(|c| !headers.iter().any(|h| h == **c)) {
        return Err(ScenarioError::MissingColumn(col));
    }
    let mut out = ParsedRecords::default();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let parsed = row
            .deserialize::<IncidentRecord>(Some(&headers))
            .map_err(|e| e.to_string())
            .and_then(|r| r.check().map(|()| r));
        match parsed {
            Ok(r) => out.records.push(r),
            Err(reason) => out.skipped.push(SkippedRow { line, reason }),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub n_agents: usize,
    /// Nodes per agent, `k`.
    pub ratio: usize,
    pub value_kind: ValueKind,
    pub seed: u64,
    /// Metres per second, shared by every agent.
    pub speed: f64,
    pub precedence_prob: f64,
    pub profit: f64,
    /// Index of the first record to consume.
    pub record_offset: usize,
    /// Sampling box for synthetic records, `[lat_min, lat_max, lon_min, lon_max]`.
    pub bbox: [f64; 4],
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            n_agents: 10,
            ratio: 1,
            value_kind: ValueKind::Superadditive,
            seed: 0,
            speed: 10.0,
            precedence_prob: 0.5,
            profit: 1.0,
            record_offset: 0,
            bbox: LONDON_BBOX,
        }
    }
}

impl ScenarioParams {
    pub fn node_count(&self) -> usize {
        self.n_agents * self.ratio
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::InvalidParams(m.to_string()));
        if self.n_agents == 0 {
            return bad("n_agents must be at least 1");
        }
        if !(1..=MAX_RATIO).contains(&self.ratio) {
            return bad("ratio must lie in 1..=20");
        }
        if !(0.0..=1.0).contains(&self.precedence_prob) {
            return bad("precedence_prob must lie in [0, 1]");
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return bad("speed must be positive");
        }
        if !(self.profit >= 0.0 && self.profit.is_finite()) {
            return bad("profit must be non-negative");
        }
        let [a, b, c, d] = self.bbox;
        if !(a <= b && c <= d && (-90.0..=90.0).contains(&a) && (-90.0..=90.0).contains(&b)
            && (-180.0..=180.0).contains(&c) && (-180.0..=180.0).contains(&d))
        {
            return bad("bbox must be [lat_min, lat_max, lon_min, lon_max] with valid degrees");
        }
        Ok(())
    }
}

/// Builds an instance from the `|V|` records following `params.record_offset`
/// and returns it with the cursor just past the last record used.
pub fn build_instance(records: &[IncidentRecord], params: &ScenarioParams) -> Result<(Instance, usize), ScenarioError> {
    params.check()?;
    let m = params.node_count();
    let offset = params.record_offset;
    if records.len() < offset + m {
        return Err(ScenarioError::InsufficientRecords {
            needed: m,
            offset,
            available: records.len(),
        });
    }
    let used = &records[offset..offset + m];
    let mut r = rng::stream(params.seed, &[TAG_DEMAND]);

    // Distinct stations in record order; agents take them round-robin.
    let mut stations: Vec<[f64; 2]> = Vec::new();
    let mut seen = HashSet::new();
    for rec in used {
        if seen.insert((rec.station_lat.to_bits(), rec.station_lon.to_bits())) {
            stations.push([rec.station_lat, rec.station_lon]);
        }
    }
    if stations.is_empty() {
        stations = station_pool().to_vec();
    }
    let homes = stations.len().min(params.n_agents);
    let mut locations: Vec<Location> = stations[..homes]
        .iter()
        .enumerate()
        .map(|(id, &coords)| Location { id, coords })
        .collect();
    let agents: Vec<Agent> = (0..params.n_agents)
        .map(|id| Agent {
            id,
            initial_location: id % homes,
            speed: params.speed,
        })
        .collect();

    let travel = TravelModel::Geo {
        earth_radius_m: EARTH_RADIUS_M,
    };
    let mut nodes = Vec::with_capacity(m);
    for rec in used {
        let loc = locations.len();
        let coords = [rec.latitude, rec.longitude];
        locations.push(Location { id: loc, coords });
        let alpha = agents
            .iter()
            .map(|a| {
                let from = locations[a.initial_location].coords;
                travel.time(a.speed, (a.initial_location, from), (loc, coords))
            })
            .min()
            .unwrap_or(0);
        let kappa = rec.attendance_seconds;
        let gamma = alpha + kappa;
        let beta = r.random_range(alpha..=gamma);
        let w = r.random_range(kappa.div_ceil(2)..=kappa);
        nodes.push(NodeDemand::new(vec![loc], w as f64, params.profit, alpha, beta, gamma)?);
    }

    let mut edges = Vec::new();
    for i in 1..m {
        let coin = r.random_bool(params.precedence_prob);
        let (p, s) = (&nodes[i - 1], &nodes[i]);
        if coin && p.earliest <= s.earliest && p.hard_latest < s.hard_latest {
            edges.push((i - 1, i));
        }
    }

    let values = ValueSpec {
        kind: params.value_kind,
        seed: rng::mix(params.seed, &[TAG_VALUES]),
    };
    let inst = Instance::new(locations, agents, nodes, PrecedenceDag::new(m, edges)?, travel, values)?;
    Ok((inst, offset + m))
}

/// The fixed pool of synthetic station sites, spread over [`LONDON_BBOX`].
pub fn station_pool() -> &'static [[f64; 2]] {
    use std::sync::OnceLock;
    static POOL: OnceLock<Vec<[f64; 2]>> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut r = rng::stream(STATION_SEED, &[]);
        (0..STATION_COUNT).map(|_| sample_point(&mut r, LONDON_BBOX)).collect()
    })
}

fn sample_point(r: &mut ChaCha8Rng, [lat0, lat1, lon0, lon1]: [f64; 4]) -> [f64; 2] {
    let lat = if lat1 > lat0 { r.random_range(lat0..lat1) } else { lat0 };
    let lon = if lon1 > lon0 { r.random_range(lon0..lon1) } else { lon0 };
    [lat, lon]
}

/// `count` synthetic records: incident sites uniform in `bbox`, attendance
/// uniform in 120..=1200 s, stations drawn from [`station_pool`].
pub fn synth_records(seed: u64, count: usize, bbox: [f64; 4]) -> Vec<IncidentRecord> {
    let mut r = rng::stream(seed, &[TAG_RECORDS]);
    let pool = station_pool();
    (0..count)
        .map(|i| {
            let [lat, lon] = sample_point(&mut r, bbox);
            let kappa = r.random_range(120..=1200);
            let [slat, slon] = pool[r.random_range(0..pool.len())];
            IncidentRecord {
                id: (i + 1).to_string(),
                timestamp: format!("t+{i}"),
                latitude: lat,
                longitude: lon,
                attendance_seconds: kappa,
                station_lat: slat,
                station_lon: slon,
            }
        })
        .collect()
}

/// Fully synthetic instance, determined by `params` alone.
pub fn synth_instance(params: &ScenarioParams) -> Result<Instance, ScenarioError> {
    params.check()?;
    let records = synth_records(params.seed, params.record_offset + params.node_count(), params.bbox);
    Ok(build_instance(&records, params)?.0)
}

/// Small grid instance for exhaustive solving: two agents, at most three
/// nodes, `dim <= 24`, integer workloads and short windows.
pub fn tiny_instance(seed: u64, kind: ValueKind) -> Instance {
    let mut r = rng::stream(seed, &[TAG_TINY]);
    let n_loc = r.random_range(2..=4usize);
    let n_nodes = r.random_range(1..=(12 / n_loc).min(3));
    let locations = (0..n_loc)
        .map(|id| Location {
            id,
            coords: [r.random_range(0..4) as f64, r.random_range(0..4) as f64],
        })
        .collect();
    let agents = (0..2)
        .map(|id| Agent {
            id,
            initial_location: r.random_range(0..n_loc),
            speed: 1.0,
        })
        .collect();
    let nodes = (0..n_nodes)
        .map(|_| {
            let mut locs = vec![r.random_range(0..n_loc)];
            if r.random_bool(0.3) {
                let extra = r.random_range(0..n_loc);
                if extra != locs[0] {
                    locs.push(extra);
                }
            }
            let alpha: Time = r.random_range(0..4);
            let beta = alpha + r.random_range(1..=4);
            let gamma = beta + r.random_range(0..=3);
            let w = r.random_range(1..=3) as f64;
            let phi = r.random_range(1..=4) as f64;
            NodeDemand::new(locs, w, phi, alpha, beta, gamma).expect("window is ordered")
        })
        .collect();
    let mut edges = Vec::new();
    if n_nodes >= 2 && r.random_bool(0.5) {
        let s = r.random_range(1..n_nodes);
        edges.push((r.random_range(0..s), s));
    }
    let values = ValueSpec {
        kind,
        seed: rng::mix(seed, &[TAG_VALUES]),
    };
    Instance::new(
        locations,
        agents,
        nodes,
        PrecedenceDag::new(n_nodes, edges).expect("single forward edge"),
        TravelModel::Grid,
        values,
    )
    .expect("tiny instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,timestamp,lat,lon,attendance_s,station_lat,station_lon\n";

    fn rec(lat: f64, lon: f64, kappa: u64, station: [f64; 2]) -> IncidentRecord {
        IncidentRecord {
            id: "x".into(),
            timestamp: "0".into(),
            latitude: lat,
            longitude: lon,
            attendance_seconds: kappa,
            station_lat: station[0],
            station_lon: station[1],
        }
    }

    #[test]
    fn parse_examples() {
        assert!(parse_records(HEADER.as_bytes()).unwrap().records.is_empty());

        let text = format!(
            "{HEADER}1,2020-01-01,51.5,-0.1,300,51.49,-0.12\n2,2020-01-02,51.6,-0.2,200,51.49,-0.12\n3,2020-01-03,51.4,0.0,100,51.5,0.01\n"
        );
        let p = parse_records(text.as_bytes()).unwrap();
        assert_eq!(p.records.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["1", "2", "3"]);
        assert!(p.skipped.is_empty());

        let text = format!("{HEADER}1,a,400,-0.1,300,51.49,-0.12\n2,b,51.6,-0.2,200,51.49,-0.12\n");
        let p = parse_records(text.as_bytes()).unwrap();
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.skipped.len(), 1);
        assert_eq!(p.skipped[0].line, 2);

        let text = format!("{HEADER}1,a,51.5,-0.1,abc,51.49,-0.12\n2,b,51.6,-0.2,200,51.49,-0.12\n");
        let p = parse_records(text.as_bytes()).unwrap();
        assert_eq!((p.records.len(), p.skipped[0].line), (1, 2));
    }

    #[test]
    fn missing_column() {
        let err = parse_records("id,timestamp,lat,lon\n".as_bytes()).unwrap_err();
        assert!(matches!(err, ScenarioError::MissingColumn("attendance_s")));
    }

    #[test]
    fn no_edge_when_alpha_decreases() {
        // Node 0 is far from the station, node 1 right next to it.
        let st = [51.5, -0.1];
        let records = vec![rec(51.6, -0.1, 300, st), rec(51.5001, -0.1, 900, st)];
        let params = ScenarioParams {
            n_agents: 1,
            ratio: 2,
            precedence_prob: 1.0,
            ..ScenarioParams::default()
        };
        let (inst, cursor) = build_instance(&records, &params).unwrap();
        assert!(inst.nodes[0].earliest > inst.nodes[1].earliest);
        assert!(inst.precedence.edges().is_empty());
        assert_eq!(cursor, 2);
    }

    #[test]
    fn certain_edge_when_windows_increase() {
        let st = [51.5, -0.1];
        let records = vec![rec(51.51, -0.1, 300, st), rec(51.52, -0.1, 300, st)];
        let params = ScenarioParams {
            n_agents: 1,
            ratio: 2,
            precedence_prob: 1.0,
            ..ScenarioParams::default()
        };
        let (inst, _) = build_instance(&records, &params).unwrap();
        assert_eq!(inst.precedence.edges(), &[(0, 1)]);
    }

    #[test]
    fn draw_ranges() {
        let st = [51.5, -0.1];
        let records: Vec<_> = (0..1000).map(|i| rec(51.5 + i as f64 * 1e-4, -0.1, 300, st)).collect();
        let params = ScenarioParams {
            n_agents: 50,
            ratio: 20,
            seed: 11,
            ..ScenarioParams::default()
        };
        let (inst, _) = build_instance(&records, &params).unwrap();
        for d in &inst.nodes {
            assert!((150.0..=300.0).contains(&d.workload));
            assert!(d.earliest <= d.soft_latest && d.soft_latest <= d.hard_latest);
            assert_eq!(d.hard_latest - d.earliest, 300);
        }
    }

    #[test]
    fn cursor_and_shortfall() {
        let records = synth_records(1, 10, LONDON_BBOX);
        let mut params = ScenarioParams {
            n_agents: 2,
            ratio: 2,
            ..ScenarioParams::default()
        };
        let (_, q) = build_instance(&records, &params).unwrap();
        assert_eq!(q, 4);
        params.record_offset = q;
        assert_eq!(build_instance(&records, &params).unwrap().1, 8);
        params.record_offset = 8;
        let err = build_instance(&records, &params).unwrap_err();
        assert!(err.to_string().contains("2 short"), "{err}");
    }

    #[test]
    fn agents_round_robin_over_stations() {
        let records = vec![
            rec(51.5, -0.1, 300, [51.4, -0.2]),
            rec(51.5, -0.1, 300, [51.6, 0.0]),
            rec(51.5, -0.1, 300, [51.4, -0.2]),
        ];
        let params = ScenarioParams {
            n_agents: 3,
            ratio: 1,
            ..ScenarioParams::default()
        };
        let (inst, _) = build_instance(&records, &params).unwrap();
        let homes: Vec<_> = inst.agents.iter().map(|a| a.initial_location).collect();
        assert_eq!(homes, vec![0, 1, 0]);
    }

    #[test]
    fn synth_is_deterministic_and_sized() {
        let p = ScenarioParams {
            n_agents: 2,
            ratio: 1,
            seed: 7,
            ..ScenarioParams::default()
        };
        let a = serde_json::to_string(&synth_instance(&p).unwrap()).unwrap();
        let b = serde_json::to_string(&synth_instance(&p).unwrap()).unwrap();
        assert_eq!(a, b);
        let big = ScenarioParams {
            n_agents: 150,
            ratio: 20,
            ..ScenarioParams::default()
        };
        assert_eq!(synth_instance(&big).unwrap().node_count(), 3000);
        assert_eq!(station_pool().len(), STATION_COUNT);
    }

    #[test]
    fn tiny_instances_fit_the_exact_cap() {
        for seed in 0..200 {
            let inst = tiny_instance(seed, ValueKind::Ndcs);
            assert!(inst.dim() <= 24, "seed {seed}");
            assert!(inst.nodes.iter().all(|d| d.workload.fract() == 0.0));
        }
    }

    #[test]
    fn bad_params() {
        let p = ScenarioParams {
            ratio: 21,
            ..ScenarioParams::default()
        };
        assert!(synth_instance(&p).is_err());
    }
}
