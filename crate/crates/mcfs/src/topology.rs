//! Component ledger: births, discards and extinctions across surgeries, and
//! the connected-sum reconstruction of the initial diffeotype.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{profile_curvature, EndCondition, SymmetricAnsatz};
use crate::neck::{cylindricity_test, neck_samples};
use crate::pinching::{classify_values, PinchingClass, PinchingConstants};

pub type ComponentId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("run incomplete: components {0:?} are still active")]
    IncompleteRun(Vec<ComponentId>),
    #[error("unknown component {0}")]
    UnknownComponent(ComponentId),
    #[error("component {0} is not active")]
    NotActive(ComponentId),
    #[error("ledger has {0} initial components; reconstruction needs exactly one")]
    MultipleRoots(usize),
    #[error("{cuts} cuts cannot produce {pieces} pieces")]
    BadCuts { pieces: usize, cuts: usize },
    #[error("{events} surgeries exceed the volume cap {cap}")]
    TooManyEvents { events: usize, cap: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Sphere,
    CylinderLoop,
    Unclassified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Status {
    Active,
    /// Replaced by the pieces of a surgery.
    Cut {
        time: f64,
    },
    Discarded {
        reason: String,
        time: f64,
    },
    Extinct {
        time: f64,
    },
}

/// Point of largest `|H|` on a discarded piece, taken before surgery.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub z: f64,
    pub norm_h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub id: ComponentId,
    pub birth_time: f64,
    pub parents: Vec<ComponentId>,
    pub ends: [EndCondition; 2],
    pub status: Status,
    pub classification: Classification,
    pub witness: Option<Witness>,
    pub area: f64,
}

/// What the ledger keeps of a piece: its ends and area.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceInfo {
    pub ends: [EndCondition; 2],
    pub area: f64,
}

impl PieceInfo {
    pub fn of(a: &SymmetricAnsatz) -> Self {
        PieceInfo {
            ends: a.ends,
            area: a.area(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgeryEdge {
    pub time: f64,
    pub parent: ComponentId,
    pub children: Vec<ComponentId>,
    pub z_interval: (f64, f64),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub components: Vec<ComponentRecord>,
    pub edges: Vec<SurgeryEdge>,
}

/// Structural classification. A periodic profile whose whole length passes
/// the cylindricity test at `epsilon` is a loop of necks; a closed profile
/// with two poles, or one that is spherically pinched everywhere, is a
/// sphere.
pub fn classify_component(a: &SymmetricAnsatz, epsilon: f64) -> Classification {
    match a.ends {
        [EndCondition::Capped, EndCondition::Capped] => Classification::Sphere,
        [EndCondition::Periodic, _] => {
            let nodes: Vec<usize> = (0..a.len() - 1).collect();
            let covered = neck_samples(a, &nodes, 0)
                .and_then(|s| cylindricity_test(a, &s, epsilon, 0))
                .is_ok();
            if covered {
                Classification::CylinderLoop
            } else if spherically_pinched(a) {
                Classification::Sphere
            } else {
                Classification::Unclassified
            }
        }
        _ => Classification::Unclassified,
    }
}

fn spherically_pinched(a: &SymmetricAnsatz) -> bool {
    let k = PinchingConstants::new(a.dim_n);
    (0..a.len()).all(|j| {
        let c = profile_curvature(&a.profile_jet(j), a.dim_n);
        matches!(
            classify_values(c.norm_a2, c.norm_h2, &k),
            Ok(PinchingClass::SphericallyPinched)
        )
    })
}

impl Ledger {
    pub fn new() -> Self {
        Ledger::default()
    }

    fn push(&mut self, time: f64, parents: Vec<ComponentId>, p: &PieceInfo) -> ComponentId {
        let id = self.components.len();
        self.components.push(ComponentRecord {
            id,
            birth_time: time,
            parents,
            ends: p.ends,
            status: Status::Active,
            classification: Classification::Unclassified,
            witness: None,
            area: p.area,
        });
        id
    }

    pub fn add_initial(&mut self, time: f64, a: &SymmetricAnsatz) -> ComponentId {
        self.push(time, Vec::new(), &PieceInfo::of(a))
    }

    pub fn get(&self, id: ComponentId) -> Result<&ComponentRecord, LedgerError> {
        self.components
            .get(id)
            .ok_or(LedgerError::UnknownComponent(id))
    }

    fn active_mut(&mut self, id: ComponentId) -> Result<&mut ComponentRecord, LedgerError> {
        let c = self
            .components
            .get_mut(id)
            .ok_or(LedgerError::UnknownComponent(id))?;
        if c.status != Status::Active {
            return Err(LedgerError::NotActive(id));
        }
        Ok(c)
    }

    /// Replace `parent` by the surgery pieces, in arclength order.
    pub fn record_surgery(
        &mut self,
        time: f64,
        parent: ComponentId,
        pieces: &[SymmetricAnsatz],
        z_interval: (f64, f64),
    ) -> Result<Vec<ComponentId>, LedgerError> {
        let info: Vec<PieceInfo> = pieces.iter().map(PieceInfo::of).collect();
        self.record_cuts(time, parent, &info, &[z_interval])
    }

    /// Replace `parent` by `pieces` (in arclength order) produced by `cuts`.
    /// Cut `i` joins piece `i` and piece `i + 1`, wrapping around for a
    /// periodic parent, where there are as many cuts as pieces.
    pub fn record_cuts(
        &mut self,
        time: f64,
        parent: ComponentId,
        pieces: &[PieceInfo],
        cuts: &[(f64, f64)],
    ) -> Result<Vec<ComponentId>, LedgerError> {
        let wraps = cuts.len() == pieces.len();
        if pieces.is_empty() || !(wraps || cuts.len() + 1 == pieces.len()) {
            return Err(LedgerError::BadCuts {
                pieces: pieces.len(),
                cuts: cuts.len(),
            });
        }
        self.active_mut(parent)?.status = Status::Cut { time };
        let children: Vec<ComponentId> = pieces
            .iter()
            .map(|p| self.push(time, vec![parent], p))
            .collect();
        for (i, z) in cuts.iter().enumerate() {
            let pair = vec![children[i], children[(i + 1) % children.len()]];
            self.edges.push(SurgeryEdge {
                time,
                parent,
                children: pair,
                z_interval: *z,
            });
        }
        Ok(children)
    }

    pub fn discard(
        &mut self,
        id: ComponentId,
        time: f64,
        reason: &str,
        classification: Classification,
        witness: Option<Witness>,
    ) -> Result<(), LedgerError> {
        let c = self.active_mut(id)?;
        c.status = Status::Discarded {
            reason: reason.to_string(),
            time,
        };
        c.classification = classification;
        c.witness = witness;
        Ok(())
    }

    pub fn extinct(
        &mut self,
        id: ComponentId,
        time: f64,
        classification: Classification,
    ) -> Result<(), LedgerError> {
        let c = self.active_mut(id)?;
        c.status = Status::Extinct { time };
        c.classification = classification;
        Ok(())
    }

    pub fn active(&self) -> Vec<ComponentId> {
        self.components
            .iter()
            .filter(|c| c.status == Status::Active)
            .map(|c| c.id)
            .collect()
    }

    pub fn terminal(&self) -> Vec<ComponentId> {
        self.components
            .iter()
            .filter(|c| matches!(c.status, Status::Discarded { .. } | Status::Extinct { .. }))
            .map(|c| c.id)
            .collect()
    }

    /// Surgery count allowed by the volume each surgery removes:
    /// `initial area / (c_n H₁⁻ⁿ)`.
    pub fn event_cap(&self, c_n: f64, h1: f64, n: usize) -> usize {
        let initial: f64 = self
            .components
            .iter()
            .filter(|c| c.parents.is_empty())
            .map(|c| c.area)
            .sum();
        (initial / (c_n * h1.powi(-(n as i32)))).floor() as usize
    }

    pub fn check_event_cap(&self, c_n: f64, h1: f64, n: usize) -> Result<(), LedgerError> {
        let cap = self.event_cap(c_n, h1, n);
        if self.edges.len() > cap {
            return Err(LedgerError::TooManyEvents {
                events: self.edges.len(),
                cap,
            });
        }
        Ok(())
    }

    pub fn tree(&self) -> Result<ConnectedSumTree, LedgerError> {
        let active = self.active();
        if !active.is_empty() {
            return Err(LedgerError::IncompleteRun(active));
        }
        let roots = self
            .components
            .iter()
            .filter(|c| c.parents.is_empty())
            .count();
        if roots != 1 {
            return Err(LedgerError::MultipleRoots(roots));
        }
        // a surgery joins one terminal descendant of each piece
        let leaf = |mut id: ComponentId| loop {
            match self.edges.iter().find(|e| e.parent == id) {
                Some(e) => id = e.children[0],
                None => return id,
            }
        };
        let nodes: BTreeMap<ComponentId, Classification> = self
            .terminal()
            .into_iter()
            .map(|id| (id, self.components[id].classification))
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|e| match e.children.as_slice() {
                [a, b] => (leaf(*a), leaf(*b)),
                _ => unreachable!("every cut joins two pieces"),
            })
            .collect();
        Ok(ConnectedSumTree { nodes, edges })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes")
    }
}

/// Terminal components joined by one edge per surgery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectedSumTree {
    pub nodes: BTreeMap<ComponentId, Classification>,
    pub edges: Vec<(ComponentId, ComponentId)>,
}

impl ConnectedSumTree {
    /// Independent cycles: `E - V + (connected pieces)`.
    pub fn cycle_rank(&self) -> usize {
        let ids: Vec<ComponentId> = self.nodes.keys().copied().collect();
        let index: BTreeMap<ComponentId, usize> =
            ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let mut parent: Vec<usize> = (0..ids.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut cycles = 0;
        for (a, b) in &self.edges {
            let (x, y) = (find(&mut parent, index[a]), find(&mut parent, index[b]));
            if x == y {
                cycles += 1;
            } else {
                parent[x] = y;
            }
        }
        cycles
    }

    pub fn loops(&self) -> usize {
        self.nodes
            .values()
            .filter(|c| **c == Classification::CylinderLoop)
            .count()
    }
}

/// `"S^n"` or `"#_k (S^{n-1} x S^1)"`.
pub fn reconstruct_diffeotype(tree: &ConnectedSumTree) -> String {
    let k = tree.cycle_rank() + tree.loops();
    if k == 0 {
        "S^n".to_string()
    } else {
        format!("#_{k} (S^{{n-1}} x S^1)")
    }
}
