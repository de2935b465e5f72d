//! Stochastic project definition, forward-pass scheduling and the planned
//! value baseline.

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curve::Curve;
use crate::error::{Error, Result};

/// The bundled eight-activity case-study project.
pub const CASE_STUDY_JSON: &str = include_str!("../../../data/case_study.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub id: String,
    pub mean_duration: f64,
    pub variance: f64,
    pub cost_rate: f64,
}

impl Activity {
    /// Planned cost of the activity at its mean duration.
    pub fn budget(&self) -> f64 {
        self.mean_duration * self.cost_rate
    }
}

/// On-disk project document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub activities: Vec<Activity>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

/// A validated project: activities, precedence DAG and derived baseline
/// figures. Immutable once built.
#[derive(Debug, Clone)]
pub struct ProjectSpec {
    name: Option<String>,
    activities: Vec<Activity>,
    edges: Vec<(usize, usize)>,
    predecessors: Vec<Vec<usize>>,
    topo_order: Vec<usize>,
    bac: f64,
    pd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub start: Vec<f64>,
    pub finish: Vec<f64>,
}

impl Schedule {
    pub fn project_finish(&self) -> f64 {
        self.finish.iter().copied().fold(0.0, f64::max)
    }
}

pub fn load_project(path: impl AsRef<Path>) -> Result<ProjectSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_project(&text)
}

pub fn parse_project(document: &str) -> Result<ProjectSpec> {
    let file: ProjectFile =
        serde_json::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
    ProjectSpec::from_file(file)
}

pub fn case_study() -> ProjectSpec {
    parse_project(CASE_STUDY_JSON).expect("bundled case study is valid")
}

impl ProjectSpec {
    pub fn from_file(file: ProjectFile) -> Result<Self> {
        Self::new(file.name, file.activities, file.edges)
    }

    pub fn new(
        name: Option<String>,
        activities: Vec<Activity>,
        edges: Vec<(String, String)>,
    ) -> Result<Self> {
        if activities.is_empty() {
            return Err(Error::Validation("project has no activities".into()));
        }
        let mut index = HashMap::new();
        for (i, a) in activities.iter().enumerate() {
            if a.id.is_empty() {
                return Err(Error::Validation(format!("activity #{i} has an empty id")));
            }
            if index.insert(a.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate activity id `{}`", a.id)));
            }
            if !(a.mean_duration.is_finite() && a.mean_duration > 0.0) {
                return Err(Error::Validation(format!(
                    "activity `{}`: mean_duration must be > 0, got {}",
                    a.id, a.mean_duration
                )));
            }
            if !(a.variance.is_finite() && a.variance >= 0.0) {
                return Err(Error::Validation(format!(
                    "activity `{}`: variance must be >= 0, got {}",
                    a.id, a.variance
                )));
            }
            if !(a.cost_rate.is_finite() && a.cost_rate >= 0.0) {
                return Err(Error::Validation(format!(
                    "activity `{}`: cost_rate must be >= 0, got {}",
                    a.id, a.cost_rate
                )));
            }
        }

        let mut seen = HashSet::new();
        let mut idx_edges = Vec::with_capacity(edges.len());
        for (p, s) in &edges {
            let pi = *index
                .get(p)
                .ok_or_else(|| Error::Validation(format!("edge {p}->{s}: unknown activity `{p}`")))?;
            let si = *index
                .get(s)
                .ok_or_else(|| Error::Validation(format!("edge {p}->{s}: unknown activity `{s}`")))?;
            if pi == si {
                return Err(Error::Validation(format!("edge {p}->{s}: self-loop")));
            }
            if !seen.insert((pi, si)) {
                return Err(Error::Validation(format!("edge {p}->{s}: duplicate edge")));
            }
            idx_edges.push((pi, si));
        }

        let n = activities.len();
        let mut predecessors = vec![Vec::new(); n];
        let mut successors = vec![Vec::new(); n];
        let mut indegree = vec![0usize; n];
        for &(p, s) in &idx_edges {
            predecessors[s].push(p);
            successors[p].push(s);
            indegree[s] += 1;
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut topo_order = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            topo_order.push(i);
            for &s in &successors[i] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    queue.push_back(s);
                }
            }
        }
        if topo_order.len() != n {
            let stuck: Vec<&str> = (0..n)
                .filter(|&i| indegree[i] > 0)
                .map(|i| activities[i].id.as_str())
                .collect();
            return Err(Error::Validation(format!(
                "precedence graph has a cycle through {}",
                stuck.join(", ")
            )));
        }

        let bac = activities.iter().map(Activity::budget).sum();
        let mut spec = Self {
            name,
            activities,
            edges: idx_edges,
            predecessors,
            topo_order,
            bac,
            pd: 0.0,
        };
        let means: Vec<f64> = spec.activities.iter().map(|a| a.mean_duration).collect();
        spec.pd = spec.schedule(&means).project_finish();
        Ok(spec)
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn activities(&self) -> &[Activity] {
        &self.activities
    }

    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Budget at completion.
    pub fn bac(&self) -> f64 {
        self.bac
    }

    /// Planned duration of the mean-duration schedule.
    pub fn pd(&self) -> f64 {
        self.pd
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.activities.iter().position(|a| a.id == id)
    }

    pub fn to_file(&self) -> ProjectFile {
        ProjectFile {
            name: self.name.clone(),
            activities: self.activities.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(p, s)| (self.activities[p].id.clone(), self.activities[s].id.clone()))
                .collect(),
        }
    }

    /// Short content hash of the project document, used to key caches and
    /// tag generated datasets.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(&self.to_file()).expect("serializable");
        let digest = Sha256::digest(&canonical);
        hex::encode(&digest[..8])
    }

    /// Forward pass with the given per-activity durations (declaration order).
    pub fn earliest_start_schedule(&self, durations: &[f64]) -> Result<Schedule> {
        if durations.len() != self.activities.len() {
            let missing = self
                .activities
                .get(durations.len())
                .map(|a| a.id.as_str())
                .unwrap_or("<none>");
            return Err(Error::InvalidInput(format!(
                "expected {} durations, got {} (missing duration for `{missing}`)",
                self.activities.len(),
                durations.len()
            )));
        }
        for (a, &d) in self.activities.iter().zip(durations) {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "duration for `{}` must be > 0, got {d}",
                    a.id
                )));
            }
        }
        Ok(self.schedule(durations))
    }

    /// Same as [`Self::earliest_start_schedule`] with durations keyed by id.
    pub fn schedule_by_id(&self, durations: &HashMap<String, f64>) -> Result<Schedule> {
        let v = self
            .activities
            .iter()
            .map(|a| {
                durations.get(&a.id).copied().ok_or_else(|| {
                    Error::InvalidInput(format!("missing duration for `{}`", a.id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.earliest_start_schedule(&v)
    }

    pub(crate) fn schedule(&self, durations: &[f64]) -> Schedule {
        let n = self.activities.len();
        let mut start = vec![0.0; n];
        let mut finish = vec![0.0; n];
        for &i in &self.topo_order {
            let s = self.predecessors[i]
                .iter()
                .map(|&p| finish[p])
                .fold(0.0, f64::max);
            start[i] = s;
            finish[i] = s + durations[i];
        }
        Schedule { start, finish }
    }

    /// Planned value curve from the mean-duration schedule with uniform cost
    /// accrual inside each activity.
    pub fn baseline_pv(&self) -> PvCurve {
        let means: Vec<f64> = self.activities.iter().map(|a| a.mean_duration).collect();
        let schedule = self.schedule(&means);
        let rates: Vec<f64> = self.activities.iter().map(|a| a.cost_rate).collect();
        let curve = accrual_curve(&schedule, &means, |i, elapsed| rates[i] * elapsed);
        PvCurve {
            curve,
            bac: self.bac,
            pd: self.pd,
        }
    }

    pub fn evm_status(&self, at: f64, ac: f64, ev: f64) -> Result<EvmStatus> {
        self.evm_status_with(&self.baseline_pv(), at, ac, ev)
    }

    pub fn evm_status_with(&self, pv: &PvCurve, at: f64, ac: f64, ev: f64) -> Result<EvmStatus> {
        if !(at.is_finite() && at >= 0.0) {
            return Err(Error::InvalidInput(format!("AT must be >= 0, got {at}")));
        }
        if !(ac.is_finite() && ac >= 0.0) {
            return Err(Error::InvalidInput(format!("AC must be >= 0, got {ac}")));
        }
        if !(ev.is_finite() && (0.0..=self.bac).contains(&ev)) {
            return Err(Error::InvalidInput(format!(
                "EV must lie in [0, {}], got {ev}",
                self.bac
            )));
        }
        let pv_at = pv.value_at(at);
        Ok(EvmStatus {
            at,
            ac,
            ev,
            pv: pv_at,
            sv: ev - pv_at,
            cv: ev - ac,
            x: ev / self.bac,
        })
    }
}

/// Builds a cumulative curve with breakpoints at every start/finish event.
/// `accrued(i, elapsed)` gives activity `i`'s contribution after `elapsed`
/// time units inside it (`elapsed ∈ [0, duration]`).
pub(crate) fn accrual_curve<F>(schedule: &Schedule, durations: &[f64], accrued: F) -> Curve
where
    F: Fn(usize, f64) -> f64,
{
    let mut times: Vec<f64> = schedule
        .start
        .iter()
        .chain(schedule.finish.iter())
        .copied()
        .chain(std::iter::once(0.0))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let values = times
        .iter()
        .map(|&t| {
            (0..durations.len())
                .map(|i| {
                    let s = schedule.start[i];
                    if t <= s {
                        0.0
                    } else if t >= schedule.finish[i] {
                        accrued(i, durations[i])
                    } else {
                        accrued(i, t - s)
                    }
                })
                .sum()
        })
        .collect();
    Curve::new(times, values)
}

/// Baseline planned value over time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PvCurve {
    curve: Curve,
    bac: f64,
    pd: f64,
}

impl PvCurve {
    pub fn value_at(&self, t: f64) -> f64 {
        self.curve.value_at(t)
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn breakpoints(&self) -> Vec<(f64, f64)> {
        self.curve.breakpoints().collect()
    }

    pub fn bac(&self) -> f64 {
        self.bac
    }

    pub fn pd(&self) -> f64 {
        self.pd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvmStatus {
    pub at: f64,
    pub ac: f64,
    pub ev: f64,
    pub pv: f64,
    pub sv: f64,
    pub cv: f64,
    pub x: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(id: &str, mean: f64, rate: f64) -> Activity {
        Activity {
            id: id.into(),
            mean_duration: mean,
            variance: 0.0,
            cost_rate: rate,
        }
    }

    fn edge(a: &str, b: &str) -> (String, String) {
        (a.into(), b.into())
    }

    #[test]
    fn case_study_baseline_figures() {
        let spec = case_study();
        assert_eq!(spec.bac(), 24613.0);
        assert_eq!(spec.pd(), 13.0);
    }

    #[test]
    fn case_study_mean_schedule_matches_baseline_rows() {
        let spec = case_study();
        let means: Vec<f64> = spec.activities().iter().map(|a| a.mean_duration).collect();
        let s = spec.earliest_start_schedule(&means).unwrap();
        let span = |id: &str| {
            let i = spec.index_of(id).unwrap();
            (s.start[i], s.finish[i])
        };
        assert_eq!(span("A1"), (0.0, 2.0));
        assert_eq!(span("A2"), (0.0, 4.0));
        assert_eq!(span("A3"), (0.0, 7.0));
        assert_eq!(span("A4"), (2.0, 5.0));
        assert_eq!(span("A5"), (4.0, 10.0));
        assert_eq!(span("A6"), (7.0, 11.0));
        assert_eq!(span("A7"), (5.0, 13.0));
        assert_eq!(span("A8"), (11.0, 13.0));
        assert_eq!(s.project_finish(), 13.0);
    }

    #[test]
    fn case_study_pv_values() {
        let pv = case_study().baseline_pv();
        assert_eq!(pv.value_at(0.0), 0.0);
        assert_eq!(pv.value_at(1.0), 2598.0);
        assert_eq!(pv.value_at(4.0), 10714.0);
        assert_eq!(pv.value_at(13.0), 24613.0);
        assert_eq!(pv.value_at(5.5), 12258.0);
    }

    #[test]
    fn single_activity_project() {
        let spec = ProjectSpec::new(None, vec![act("X", 1.0, 5.0)], vec![]).unwrap();
        assert_eq!(spec.bac(), 5.0);
        assert_eq!(spec.pd(), 1.0);
    }

    #[test]
    fn chain_and_parallel_schedules() {
        let chain = ProjectSpec::new(
            None,
            vec![act("A", 2.0, 1.0), act("B", 3.0, 1.0)],
            vec![edge("A", "B")],
        )
        .unwrap();
        let s = chain.earliest_start_schedule(&[2.0, 3.0]).unwrap();
        assert_eq!((s.start[0], s.finish[0]), (0.0, 2.0));
        assert_eq!((s.start[1], s.finish[1]), (2.0, 5.0));

        let par = ProjectSpec::new(None, vec![act("A", 4.0, 1.0), act("B", 7.0, 1.0)], vec![])
            .unwrap();
        let s = par.earliest_start_schedule(&[4.0, 7.0]).unwrap();
        assert_eq!(s.project_finish(), 7.0);
    }

    #[test]
    fn rejects_cycle() {
        let err = ProjectSpec::new(
            None,
            vec![act("A", 1.0, 1.0), act("B", 1.0, 1.0)],
            vec![edge("A", "B"), edge("B", "A")],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("cycle")), "{err}");
    }

    #[test]
    fn rejects_bad_elements_by_name() {
        let dangling = ProjectSpec::new(None, vec![act("A", 1.0, 1.0)], vec![edge("A", "Z")])
            .unwrap_err();
        assert!(dangling.to_string().contains("`Z`"));

        let self_loop =
            ProjectSpec::new(None, vec![act("A", 1.0, 1.0)], vec![edge("A", "A")]).unwrap_err();
        assert!(self_loop.to_string().contains("self-loop"));

        let zero = ProjectSpec::new(None, vec![act("Q", 0.0, 1.0)], vec![]).unwrap_err();
        assert!(zero.to_string().contains("`Q`"));

        let mut neg = act("V", 1.0, 1.0);
        neg.variance = -1.0;
        let err = ProjectSpec::new(None, vec![neg], vec![]).unwrap_err();
        assert!(err.to_string().contains("variance"));

        let dup = ProjectSpec::new(
            None,
            vec![act("A", 1.0, 1.0), act("B", 1.0, 1.0)],
            vec![edge("A", "B"), edge("A", "B")],
        )
        .unwrap_err();
        assert!(dup.to_string().contains("duplicate"));
    }

    #[test]
    fn malformed_document_is_parse_error() {
        let err = parse_project("{ not json").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn missing_duration_is_reported() {
        let spec = case_study();
        let err = spec.earliest_start_schedule(&[1.0, 2.0]).unwrap_err();
        assert!(err.to_string().contains("A3"), "{err}");
        let mut by_id = HashMap::new();
        by_id.insert("A1".to_string(), 2.0);
        assert!(spec.schedule_by_id(&by_id).is_err());
    }

    #[test]
    fn evm_status_examples() {
        let spec = case_study();
        let s = spec.evm_status(4.0, 10714.0, 10714.0).unwrap();
        assert_eq!(s.sv, 0.0);
        assert_eq!(s.cv, 0.0);
        assert!((s.x - 0.43530).abs() < 1e-5);

        let z = spec.evm_status(0.0, 0.0, 0.0).unwrap();
        assert_eq!((z.sv, z.cv, z.x), (0.0, 0.0, 0.0));

        let over = spec.evm_status(4.0, 12000.0, 10714.0).unwrap();
        assert_eq!(over.cv, -1286.0);

        assert!(spec.evm_status(4.0, 1.0, 30000.0).is_err());
        assert!(spec.evm_status(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn fingerprint_is_stable() {
        assert_eq!(case_study().fingerprint(), case_study().fingerprint());
        assert_eq!(case_study().fingerprint().len(), 16);
    }
}
