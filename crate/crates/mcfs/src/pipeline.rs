//! Flow with surgery: evolve every active component in lockstep, and when
//! one reaches `H₃` cut its high-curvature regions, discard the recognized
//! pieces and keep going until nothing is left.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::flow::{
    stable_dt, step, FlowError, FlowState, MetricsWriter, StepMetrics, SurgeryTime,
    SurgeryTimeRecord, ThresholdSet,
};
use crate::models::{dist, snapshot, sphere_area, EndCondition, SymmetricAnsatz};
use crate::neck::{
    find_cylindrical_point, neck_detect, DetectThresholds, Detection, FlowHistory, NeckError,
    NeckEvent, ParabolicNbhd, ScanResult, SurgeryFootprint,
};
use crate::pinching::{
    class_membership, classify_values, monitor_sweep, q_value, sample_nodes, MonitorConstants,
    MonitorKind, PinchingClass, PinchingConstants,
};
use crate::surgery::{standard_surgery, surgery_site_selection, Side, SurgeryAudit, SurgeryError};
use crate::topology::{
    classify_component, reconstruct_diffeotype, Classification, ComponentId, Ledger, LedgerError,
    PieceInfo, Witness,
};

/// `|H|` may grow by at most this fraction per step once it passes `H₃/2`.
const APPROACH_GROWTH: f64 = 0.005;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("initial datum is outside the surgery class: {0}")]
    Precondition(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("surgery failed on component {component} at t = {t}: {source}")]
    Surgery {
        component: ComponentId,
        t: f64,
        source: SurgeryError,
    },
    #[error("neck analysis failed on component {component} at t = {t}: {source}")]
    Neck {
        component: ComponentId,
        t: f64,
        source: NeckError,
    },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("monitor {bound} violated at t = {t}, z = {z}: {lhs} > {rhs}")]
    Monitor {
        t: f64,
        z: f64,
        bound: &'static str,
        lhs: f64,
        rhs: f64,
    },
    #[error("surgery contract violated: {0:?}")]
    Contract(Vec<String>),
    #[error("step limit {0} reached with components still active")]
    StepLimit(usize),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PipelineError {
    /// 1 for failed assertions, 2 for configuration problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Precondition(_) => 2,
            PipelineError::Surgery {
                source: SurgeryError::AuditFailed(_),
                ..
            }
            | PipelineError::Ledger(_)
            | PipelineError::Monitor { .. }
            | PipelineError::Contract(_) => 1,
            _ => 3,
        }
    }
}

/// One standard surgery inside a surgery time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgeryReport {
    pub time: f64,
    pub component: ComponentId,
    pub side: Side,
    pub audit: SurgeryAudit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub thresholds: ThresholdSet,
    pub steps: usize,
    pub final_time: f64,
    pub surgery_times: SurgeryTimeRecord,
    pub surgeries: usize,
    pub contract_violations: Vec<String>,
    /// Smallest `|H|` among discard witnesses, against `10 H₁`.
    pub min_witness_h: Option<f64>,
    pub diffeotype: String,
    pub monitor_warnings: usize,
    pub neck_events: usize,
}

struct Component {
    id: ComponentId,
    state: FlowState,
    history: FlowHistory,
}

/// Output files of one run.
pub struct Outputs {
    pub dir: PathBuf,
    metrics: MetricsWriter<BufWriter<File>>,
    monitors: BufWriter<File>,
    necks: BufWriter<File>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

impl Outputs {
    fn open(dir: &Path) -> Result<Self, PipelineError> {
        for sub in ["", "snapshots", "audits"] {
            let d = dir.join(sub);
            fs::create_dir_all(&d).map_err(io_err(&d))?;
        }
        let mpath = dir.join("metrics.csv");
        let metrics = MetricsWriter::new(create(&mpath)?).map_err(io_err(&mpath))?;
        let mon_path = dir.join("monitors.csv");
        let mut monitors = create(&mon_path)?;
        let names: Vec<&str> = MonitorKind::ALL.iter().map(|k| k.name()).collect();
        writeln!(monitors, "t,min_q,max_ratio,{}", names.join(",")).map_err(io_err(&mon_path))?;
        let necks = create(&dir.join("necks.jsonl"))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            metrics,
            monitors,
            necks,
        })
    }

    fn write_file(&self, name: &str, text: &str) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))
    }

    fn snapshot(
        &self,
        step: usize,
        id: ComponentId,
        a: &SymmetricAnsatz,
    ) -> Result<(), PipelineError> {
        let path = self
            .dir
            .join("snapshots")
            .join(format!("step{step:07}_c{id}.csv"));
        snapshot::write(&path, a).map_err(io_err(&path))
    }

    fn finish(mut self) -> Result<(), PipelineError> {
        let dir = self.dir.clone();
        self.metrics.into_inner().flush().map_err(io_err(&dir))?;
        self.monitors.flush().map_err(io_err(&dir))?;
        self.necks.flush().map_err(io_err(&dir))
    }
}

const PLOT_SCRIPT: &str = r#"# Plot the metrics of a run: python3 plot_metrics.py [run directory]
import csv, sys, os
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

d = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
rows = list(csv.DictReader(open(os.path.join(d, "metrics.csv"))))
t = [float(r["t"]) for r in rows]
fig, ax = plt.subplots(2, 2, figsize=(10, 7))
for a, key in zip(ax.flat, ["max_h", "min_r", "min_q", "area"]):
    a.plot(t, [float(r[key]) for r in rows])
    a.set_xlabel("t")
    a.set_ylabel(key)
fig.tight_layout()
fig.savefig(os.path.join(d, "metrics.png"), dpi=120)
"#;

fn pinching_classes(state: &FlowState, k: &PinchingConstants) -> Vec<Option<PinchingClass>> {
    state.curv[..state.live_nodes()]
        .iter()
        .map(|c| classify_values(c.norm_a2, c.norm_h2, k).ok())
        .collect()
}

fn spherically_pinched(state: &FlowState) -> bool {
    let k = PinchingConstants::new(state.geometry.dim_n);
    pinching_classes(state, &k)
        .iter()
        .all(|c| *c == Some(PinchingClass::SphericallyPinched))
}

/// Area of the part of the profile with arclength in `[s0, s1]`.
fn segment_area(a: &SymmetricAnsatz, s0: f64, s1: f64) -> f64 {
    let s = a.arclength();
    let sigma = sphere_area(a.dim_n - 1);
    let p = a.points();
    let mut area = 0.0;
    for k in 0..a.len() - 1 {
        let (lo, hi) = (s[k].max(s0), s[k + 1].min(s1));
        if hi <= lo {
            continue;
        }
        let f0 = a.radius[k].powi(a.dim_n as i32 - 1);
        let f1 = a.radius[k + 1].powi(a.dim_n as i32 - 1);
        let frac = (hi - lo) / dist(&p[k], &p[k + 1]).max(1e-300);
        area += sigma * 0.5 * (f0 + f1) * (s[k + 1] - s[k]) * frac.min(1.0);
    }
    area
}

/// Largest `|H|` among nodes with arclength in `[s0, s1]`.
fn witness_in(state: &FlowState, s0: f64, s1: f64) -> Option<Witness> {
    let s = state.geometry.arclength();
    (0..state.live_nodes())
        .filter(|&k| s[k] >= s0 && s[k] <= s1)
        .max_by(|&i, &j| state.curv[i].norm_h2.total_cmp(&state.curv[j].norm_h2))
        .map(|k| Witness {
            z: state.geometry.z_nodes[k],
            norm_h: state.curv[k].norm_h2.sqrt(),
        })
}

pub struct Pipeline<'a> {
    cfg: &'a RunConfig,
    th: ThresholdSet,
    pinch: PinchingConstants,
    monitors: MonitorConstants,
    ledger: Ledger,
    active: Vec<Component>,
    footprints: Vec<SurgeryFootprint>,
    record: SurgeryTimeRecord,
    reports: Vec<SurgeryReport>,
    witnesses: Vec<Witness>,
    neck_events: usize,
    monitor_warnings: usize,
    t: f64,
    steps: usize,
    out: Outputs,
}

/// Run the configured flow to termination, writing every output file.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    let initial = cfg.initial_datum()?;
    let report = class_membership(&initial, &cfg.class.into()).map_err(ConfigError::from)?;
    if !report.holds() {
        return Err(PipelineError::Precondition(format!("{report:?}")));
    }
    let state = FlowState::new(initial);
    let pinch = PinchingConstants::new(cfg.run.n);
    if pinching_classes(&state, &pinch).iter().any(|c| {
        !matches!(
            c,
            Some(PinchingClass::SphericallyPinched | PinchingClass::CylindricallyPinched)
        )
    }) {
        return Err(PipelineError::Precondition(
            "not cylindrically pinched everywhere".into(),
        ));
    }
    let samples = sample_nodes(&state.geometry, true).map_err(ConfigError::from)?;
    let monitors =
        MonitorConstants::calibrate(&samples, cfg.run.n, cfg.thresholds.r, cfg.monitors.sigma);
    let out = Outputs::open(&cfg.run.output)?;
    out.write_file("config.toml", &cfg.to_toml())?;
    out.write_file("plot_metrics.py", PLOT_SCRIPT)?;
    let mut ledger = Ledger::new();
    let id = ledger.add_initial(0.0, &state.geometry);
    let mut p = Pipeline {
        cfg,
        th: cfg.threshold_set()?,
        pinch,
        monitors,
        ledger,
        active: Vec::new(),
        footprints: Vec::new(),
        record: SurgeryTimeRecord::default(),
        reports: Vec::new(),
        witnesses: Vec::new(),
        neck_events: 0,
        monitor_warnings: 0,
        t: 0.0,
        steps: 0,
        out,
    };
    p.out.snapshot(0, id, &state.geometry)?;
    p.active.push(p.component(id, state));
    p.main_loop()
}

impl Pipeline<'_> {
    fn component(&self, id: ComponentId, mut state: FlowState) -> Component {
        state.t = self.t;
        let n = self.cfg.run.n as f64;
        let rhat = (n - 1.0) / self.th.h3;
        let mut history = FlowHistory::new(2.0 * self.cfg.detection.theta * rhat * rhat);
        history.push(self.t, &state.geometry);
        Component { id, state, history }
    }

    fn main_loop(mut self) -> Result<RunSummary, PipelineError> {
        self.sweep_monitors()?;
        loop {
            self.retire_spheres()?;
            if self.active.iter().any(|c| c.state.max_h() >= self.th.h3) {
                self.surgery_time()?;
            }
            if self.active.is_empty() {
                break;
            }
            if self.steps >= self.cfg.run.max_steps {
                return Err(PipelineError::StepLimit(self.steps));
            }
            self.advance()?;
        }
        self.finish()
    }

    /// One lockstep time step of every component.
    fn advance(&mut self) -> Result<(), PipelineError> {
        let flow = &self.cfg.flow;
        let mut dt = self
            .active
            .iter()
            .map(|c| stable_dt(&c.state, flow))
            .fold(f64::INFINITY, f64::min);
        let max_h = self
            .active
            .iter()
            .map(|c| c.state.max_h())
            .fold(0.0, f64::max);
        if max_h >= 0.5 * self.th.h3 {
            let max_a2 = self
                .active
                .iter()
                .map(|c| c.state.max_a2())
                .fold(0.0, f64::max);
            dt = dt.min(APPROACH_GROWTH / max_a2);
        }
        for c in &mut self.active {
            let (next, _) = step(&c.state, dt, flow)?;
            c.state = next;
            c.state.t = self.t + dt;
            c.history.push(c.state.t, &c.state.geometry);
        }
        self.t += dt;
        self.steps += 1;
        let m = self.combined_metrics(dt);
        self.out.metrics.push(&m).map_err(io_err(&self.out.dir))?;
        let every = self.cfg.run.snapshot_every;
        if every > 0 && self.steps % every == 0 {
            for c in &self.active {
                self.out.snapshot(self.steps, c.id, &c.state.geometry)?;
            }
        }
        let every = self.cfg.monitors.every;
        if every > 0 && self.steps % every == 0 {
            self.sweep_monitors()?;
        }
        Ok(())
    }

    fn combined_metrics(&self, dt: f64) -> StepMetrics {
        let ms: Vec<StepMetrics> = self
            .active
            .iter()
            .map(|c| c.state.metrics(dt, &self.pinch))
            .collect();
        StepMetrics {
            t: self.t,
            dt,
            max_h: ms.iter().map(|m| m.max_h).fold(0.0, f64::max),
            max_a2: ms.iter().map(|m| m.max_a2).fold(0.0, f64::max),
            min_r: ms.iter().map(|m| m.min_r).fold(f64::INFINITY, f64::min),
            min_q: ms.iter().map(|m| m.min_q).fold(f64::INFINITY, f64::min),
            area: ms.iter().map(|m| m.area).sum(),
        }
    }

    fn sweep_monitors(&mut self) -> Result<(), PipelineError> {
        let mut worst = [f64::INFINITY; 5];
        let (mut min_q, mut max_ratio) = (f64::INFINITY, 0.0f64);
        for c in &self.active {
            let samples =
                sample_nodes(&c.state.geometry, true).map_err(|e| PipelineError::Flow(e.into()))?;
            for s in &samples {
                min_q = min_q.min(q_value(
                    s.norm_a2,
                    s.norm_h2,
                    self.pinch.c_cylindrical,
                    self.pinch.a_offset,
                ));
                max_ratio = max_ratio.max(s.ratio());
            }
            let summary = monitor_sweep(&samples, self.cfg.run.n, &self.monitors);
            for (kind, m) in &summary.worst {
                let i = MonitorKind::ALL
                    .iter()
                    .position(|k| k == kind)
                    .expect("known monitor");
                worst[i] = worst[i].min(*m);
            }
            self.monitor_warnings += summary.violations.len() - summary.fatal().len();
            if self.cfg.monitors.fail_on_violation {
                if let Some(v) = summary.fatal().first() {
                    return Err(PipelineError::Monitor {
                        t: self.t,
                        z: v.z,
                        bound: v.bound.name(),
                        lhs: v.lhs,
                        rhs: v.rhs,
                    });
                }
            }
        }
        let cols: Vec<String> = worst
            .iter()
            .map(|w| {
                if w.is_finite() {
                    format!("{w:e}")
                } else {
                    String::new()
                }
            })
            .collect();
        writeln!(
            self.out.monitors,
            "{:e},{:e},{:e},{}",
            self.t,
            min_q,
            max_ratio,
            cols.join(",")
        )
        .map_err(io_err(&self.out.dir))
    }

    /// Surgery creates gradients the initial datum never had, so after each
    /// surgery time every constant is raised to cover the new pieces.
    fn widen_monitors(&mut self) -> Result<(), PipelineError> {
        let (n, r, sigma) = (
            self.cfg.run.n,
            self.cfg.thresholds.r,
            self.cfg.monitors.sigma,
        );
        for c in &self.active {
            let samples =
                sample_nodes(&c.state.geometry, true).map_err(|e| PipelineError::Flow(e.into()))?;
            let fresh = MonitorConstants::calibrate(&samples, n, r, sigma);
            let m = &mut self.monitors;
            m.gamma1 = m.gamma1.max(fresh.gamma1);
            m.gamma2 = m.gamma2.max(fresh.gamma2);
            m.gamma3 = m.gamma3.max(fresh.gamma3);
            m.gamma4 = m.gamma4.max(fresh.gamma4);
            m.naff_c = m.naff_c.max(fresh.naff_c);
            m.h_sharp = m.h_sharp.max(fresh.h_sharp);
            if fresh.c_sharp > m.c_sharp {
                m.c_sharp = fresh.c_sharp;
                (m.d_sharp, m.theta) = MonitorConstants::from_c_sharp(n, m.c_sharp);
            }
        }
        Ok(())
    }

    /// Components that are spherically pinched with `|H| ≥ H₂` are
    /// classified as shrinking spheres and leave the run.
    fn retire_spheres(&mut self) -> Result<(), PipelineError> {
        let mut keep = Vec::new();
        for c in std::mem::take(&mut self.active) {
            if c.state.max_h() >= self.th.h2
                && c.state.max_h() < self.th.h3
                && spherically_pinched(&c.state)
            {
                self.out.snapshot(self.steps, c.id, &c.state.geometry)?;
                self.ledger.extinct(c.id, self.t, Classification::Sphere)?;
            } else {
                keep.push(c);
            }
        }
        self.active = keep;
        Ok(())
    }

    /// Cut every region with `|H| ≥ H₂`, then check the curvature contract.
    fn surgery_time(&mut self) -> Result<(), PipelineError> {
        let pre_max_h = self
            .active
            .iter()
            .map(|c| c.state.max_h())
            .fold(0.0, f64::max);
        let mut queue: Vec<Component> = std::mem::take(&mut self.active);
        queue.reverse();
        let mut discarded = Vec::new();
        while let Some(c) = queue.pop() {
            if c.state.max_h() < self.th.h2 {
                self.active.push(c);
                continue;
            }
            self.out.snapshot(self.steps, c.id, &c.state.geometry)?;
            let pieces = self.resolve(c, &mut discarded)?;
            // pieces go back to the front so a component is finished before the next
            for piece in pieces.into_iter().rev() {
                queue.push(piece);
            }
        }
        for c in &self.active {
            self.out.snapshot(self.steps, c.id, &c.state.geometry)?;
        }
        self.widen_monitors()?;
        let post_max_h = self
            .active
            .iter()
            .map(|c| c.state.max_h())
            .fold(0.0, f64::max);
        self.record.times.push(SurgeryTime {
            t: self.t,
            pre_max_h,
            post_max_h,
            discarded,
        });
        let n = self.cfg.run.n;
        self.ledger
            .check_event_cap(event_constant(n), self.th.h1, n)?;
        Ok(())
    }

    /// Handle one component above `H₂` at a surgery time: retire it, or cut
    /// it and return the kept pieces.
    fn resolve(
        &mut self,
        c: Component,
        discarded: &mut Vec<ComponentId>,
    ) -> Result<Vec<Component>, PipelineError> {
        let (id, t) = (c.id, self.t);
        let a = &c.state.geometry;
        if spherically_pinched(&c.state) {
            self.ledger.extinct(id, t, Classification::Sphere)?;
            return Ok(Vec::new());
        }
        let d = &self.cfg.detection;
        let neck_err = |source| PipelineError::Neck {
            component: id,
            t,
            source,
        };
        let p = c.state.argmax_h();
        let q =
            match find_cylindrical_point(a, p, d.eta0, d.c_sharp, d.h_sharp).map_err(neck_err)? {
                ScanResult::CompactCertificate { .. } => {
                    let w = witness_in(&c.state, f64::NEG_INFINITY, f64::INFINITY);
                    self.discard_whole(&c, "compact certificate", w, discarded)?;
                    return Ok(Vec::new());
                }
                ScanResult::CylindricalPoint { index, .. } => index,
            };
        self.log_neck(&c, q)?;
        let h1 = self.th.h1;
        let surg_err = |source| PipelineError::Surgery {
            component: id,
            t,
            source,
        };
        let left = surgery_site_selection(a, q, -1, h1).ok();
        let right = surgery_site_selection(a, q, 1, h1).ok();
        let s = a.arclength();
        let (s_first, s_last) = (s[0], s[a.len() - 1]);
        let params = &self.cfg.surgery;
        if a.ends[0] == EndCondition::Periodic {
            let Some(site) = left.or(right) else {
                let w = witness_in(&c.state, s_first, s_last);
                self.discard_whole(&c, "neck covers the component", w, discarded)?;
                return Ok(Vec::new());
            };
            let o = standard_surgery(a, site.s0, params, &[]).map_err(surg_err)?;
            self.note_surgery(id, Side::After, &o.audit, o.z_interval);
            let kids = self.ledger.record_cuts(
                t,
                id,
                &[PieceInfo::of(&o.components[0])],
                &[o.z_interval],
            )?;
            let piece = o.components.into_iter().next().expect("one piece");
            return Ok(vec![self.component(kids[0], FlowState::new(piece))]);
        }
        let before = match &left {
            Some(site) => {
                Some(standard_surgery(a, site.s0, params, &[Side::Before]).map_err(surg_err)?)
            }
            None => None,
        };
        let after = match &right {
            Some(site) => {
                Some(standard_surgery(a, site.s0, params, &[Side::After]).map_err(surg_err)?)
            }
            None => None,
        };
        if before.is_none() && after.is_none() {
            let w = witness_in(&c.state, s_first, s_last);
            self.discard_whole(&c, "no surgery site", w, discarded)?;
            return Ok(Vec::new());
        }
        // the discarded middle runs between the cuts, or to the profile end
        let lo = left.as_ref().map_or(s_first, |x| x.s0);
        let hi = right.as_ref().map_or(s_last, |x| x.s0);
        let mid_ends = [
            if left.is_some() {
                EndCondition::Capped
            } else {
                a.ends[0]
            },
            if right.is_some() {
                EndCondition::Capped
            } else {
                a.ends[1]
            },
        ];
        let mid = PieceInfo {
            ends: mid_ends,
            area: segment_area(a, lo, hi),
        };
        let mut infos = Vec::new();
        let mut cuts = Vec::new();
        let mut kept = Vec::new();
        if let Some(o) = &before {
            self.note_surgery(id, Side::Before, &o.audit, o.z_interval);
            infos.push(PieceInfo::of(&o.components[0]));
            cuts.push(o.z_interval);
            kept.push(o.components[0].clone());
        }
        let mid_slot = infos.len();
        infos.push(mid);
        if let Some(o) = &after {
            self.note_surgery(id, Side::After, &o.audit, o.z_interval);
            infos.push(PieceInfo::of(&o.components[0]));
            cuts.push(o.z_interval);
            kept.push(o.components[0].clone());
        }
        let kids = self.ledger.record_cuts(t, id, &infos, &cuts)?;
        let mid_id = kids[mid_slot];
        let w = witness_in(&c.state, lo, hi);
        if let Some(w) = w {
            self.witnesses.push(w);
        }
        let class = if mid_ends == [EndCondition::Capped; 2] {
            Classification::Sphere
        } else {
            Classification::Unclassified
        };
        self.ledger
            .discard(mid_id, t, "neck remnant past the surgery sites", class, w)?;
        discarded.push(mid_id);
        let kept_ids = kids.iter().copied().filter(|&k| k != mid_id);
        Ok(kept_ids
            .zip(kept)
            .map(|(k, g)| self.component(k, FlowState::new(g)))
            .collect())
    }

    fn discard_whole(
        &mut self,
        c: &Component,
        reason: &str,
        w: Option<Witness>,
        discarded: &mut Vec<ComponentId>,
    ) -> Result<(), PipelineError> {
        let class = classify_component(&c.state.geometry, self.cfg.detection.loop_epsilon);
        if let Some(w) = w {
            self.witnesses.push(w);
        }
        self.ledger.discard(c.id, self.t, reason, class, w)?;
        discarded.push(c.id);
        Ok(())
    }

    fn note_surgery(&mut self, id: ComponentId, side: Side, audit: &SurgeryAudit, z: (f64, f64)) {
        self.footprints.push(SurgeryFootprint {
            time: self.t,
            z_interval: (z.0.min(z.1), z.0.max(z.1)),
            component: id,
        });
        self.reports.push(SurgeryReport {
            time: self.t,
            component: id,
            side,
            audit: audit.clone(),
        });
    }

    fn log_neck(&mut self, c: &Component, q: usize) -> Result<(), PipelineError> {
        let d = &self.cfg.detection;
        let th = DetectThresholds {
            h0: d.h0,
            eta0: d.eta0,
        };
        let nbhd = ParabolicNbhd {
            node: q,
            time: self.t,
            radius: d.window,
            lookback: d.theta,
            normalized: true,
        };
        let det = neck_detect(
            &c.history,
            q,
            &th,
            &nbhd,
            &self.footprints,
            c.id,
            self.cfg.surgery.k0,
        )
        .map_err(|source| PipelineError::Neck {
            component: c.id,
            t: self.t,
            source,
        })?;
        if let Detection::Detected(quality) = det {
            let pc = &c.state.curv[q];
            let ev = NeckEvent {
                time: self.t,
                interval: quality.interval,
                epsilon: quality.epsilon,
                axis: quality.axis,
                norm_h: pc.norm_h2.sqrt(),
                ratio: pc.norm_a2 / pc.norm_h2,
            };
            writeln!(self.out.necks, "{}", ev.json_line()).map_err(io_err(&self.out.dir))?;
            self.neck_events += 1;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<RunSummary, PipelineError> {
        let n = self.cfg.run.n;
        for (i, r) in self.reports.iter().enumerate() {
            let text = serde_json::to_string_pretty(r).expect("audit serializes");
            self.out
                .write_file(&format!("audits/surgery_{i:03}.json"), &text)?;
        }
        self.out.write_file("ledger.json", &self.ledger.to_json())?;
        let tree = self.ledger.tree()?;
        let contract_violations = self.record.check(n, &self.th, 0.02);
        let summary = RunSummary {
            thresholds: self.th,
            steps: self.steps,
            final_time: self.t,
            surgeries: self.reports.len(),
            surgery_times: std::mem::take(&mut self.record),
            contract_violations,
            min_witness_h: self.witnesses.iter().map(|w| w.norm_h).reduce(f64::min),
            diffeotype: reconstruct_diffeotype(&tree),
            monitor_warnings: self.monitor_warnings,
            neck_events: self.neck_events,
        };
        self.out.write_file(
            "summary.json",
            &serde_json::to_string_pretty(&summary).expect("summary serializes"),
        )?;
        self.out.finish()?;
        if !summary.contract_violations.is_empty() {
            return Err(PipelineError::Contract(summary.contract_violations));
        }
        Ok(summary)
    }
}

/// Volume constant of the event cap: a discarded neck piece contains at
/// least a cylinder of radius and length `r* = (n-1)/H₁`.
pub fn event_constant(n: usize) -> f64 {
    sphere_area(n - 1) * ((n - 1) as f64).powi(n as i32)
}
