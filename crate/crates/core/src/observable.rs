//! Γ-invariant test functions on the unit cotangent bundle.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{to_chart, ChartPhasePoint, GroupElement};
use crate::potential::{Bump, PotentialField};
use crate::quotient::radial_point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    One,
    VPullback,
    FV,
    Product,
    CustomBump,
}

impl ObservableKind {
    pub fn id(&self) -> &'static str {
        match self {
            ObservableKind::One => "one",
            ObservableKind::VPullback => "v_pullback",
            ObservableKind::FV => "f_v",
            ObservableKind::Product => "product",
            ObservableKind::CustomBump => "custom_bump",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "one" => ObservableKind::One,
            "v_pullback" => ObservableKind::VPullback,
            "f_v" => ObservableKind::FV,
            "product" => ObservableKind::Product,
            "custom_bump" => ObservableKind::CustomBump,
            other => return Err(Error::InvalidInput(format!("unknown observable '{other}'"))),
        })
    }
}

/// A smooth function on `T*M − M`, extended 0-homogeneously from the unit layer.
#[derive(Debug, Clone)]
pub struct Observable {
    kind: ObservableKind,
    potential: Arc<PotentialField>,
    /// Independent bump potential, only used by [`ObservableKind::CustomBump`].
    auxiliary: Option<Arc<PotentialField>>,
}

/// Bump used by the `custom_bump` observable: unrelated to the default potential.
pub fn custom_bump() -> Bump {
    Bump { center: radial_point(4.0, 0.9), radius: 2.9, amplitude: 1.0 }
}

impl Observable {
    pub fn new(kind: ObservableKind, potential: Arc<PotentialField>) -> Self {
        let auxiliary = (kind == ObservableKind::CustomBump).then(|| {
            Arc::new(
                PotentialField::new(vec![custom_bump()], potential.group().clone())
                    .expect("custom bump is valid"),
            )
        });
        Self { kind, potential, auxiliary }
    }

    pub fn kind(&self) -> ObservableKind {
        self.kind
    }

    pub fn id(&self) -> &'static str {
        self.kind.id()
    }

    pub fn potential(&self) -> &Arc<PotentialField> {
        &self.potential
    }

    pub fn eval_chart(&self, p: &ChartPhasePoint) -> f64 {
        match self.kind {
            ObservableKind::One => 1.0,
            ObservableKind::VPullback => self.potential.eval_v(p.base()),
            ObservableKind::FV => self.potential.f_v_unchecked(&p.normalized()),
            ObservableKind::Product => {
                let q = p.normalized();
                self.potential.eval_v(q.base()) * self.potential.f_v_unchecked(&q)
            }
            ObservableKind::CustomBump => self.auxiliary.as_ref().map_or(0.0, |a| a.eval_v(p.base())),
        }
    }

    pub fn eval(&self, g: &GroupElement) -> f64 {
        match self.kind {
            ObservableKind::One => 1.0,
            ObservableKind::VPullback => self.potential.eval_v(g.base_point()),
            ObservableKind::CustomBump => self.auxiliary.as_ref().map_or(0.0, |a| a.eval_v(g.base_point())),
            _ => self.eval_chart(&to_chart(g)),
        }
    }
}
