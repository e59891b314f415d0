use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Density of water, kg/m³.
pub const WATER_DENSITY: f64 = 997.0;
/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

/// Operating points of a generator's efficiency curve. `Stab` is the
/// short-lived point above `Max` reachable during a frequency event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Yield {
    Min,
    Opt,
    Max,
    Stab,
}

impl Yield {
    /// The yields a generator can hold in steady state.
    pub const NORMAL: [Yield; 3] = [Yield::Min, Yield::Opt, Yield::Max];
    pub const ALL: [Yield; 4] = [Yield::Min, Yield::Opt, Yield::Max, Yield::Stab];

    pub fn as_str(self) -> &'static str {
        match self {
            Yield::Min => "min",
            Yield::Opt => "opt",
            Yield::Max => "max",
            Yield::Stab => "stab",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DropHeight {
    Low,
    High,
}

impl DropHeight {
    pub const ALL: [DropHeight; 2] = [DropHeight::Low, DropHeight::High];

    pub fn as_str(self) -> &'static str {
        match self {
            DropHeight::Low => "low",
            DropHeight::High => "high",
        }
    }
}

/// A pair of values indexed by drop height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightPair<T> {
    pub low: T,
    pub high: T,
}

impl<T: Copy> HeightPair<T> {
    pub fn get(&self, dh: DropHeight) -> T {
        match dh {
            DropHeight::Low => self.low,
            DropHeight::High => self.high,
        }
    }
}

/// One value per yield.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldValues<T> {
    pub min: T,
    pub opt: T,
    pub max: T,
    pub stab: T,
}

impl<T: Copy> YieldValues<T> {
    pub fn get(&self, y: Yield) -> T {
        match y {
            Yield::Min => self.min,
            Yield::Opt => self.opt,
            Yield::Max => self.max,
            Yield::Stab => self.stab,
        }
    }
}

/// Operating data of one generator at one (yield, drop height) vertex.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vertex {
    /// MW.
    pub power: f64,
    /// m³/s.
    pub flow: f64,
    /// Regulation headroom upward, MW.
    #[serde(default)]
    pub sfc_up: f64,
    /// Regulation headroom downward, MW.
    #[serde(default)]
    pub sfc_down: f64,
    /// Extra output available during a transient, MW.
    #[serde(default)]
    pub pfc_margin: f64,
}

pub type VertexTable = YieldValues<HeightPair<Vertex>>;

impl VertexTable {
    pub fn vertex(&self, y: Yield, dh: DropHeight) -> Vertex {
        self.get(y).get(dh)
    }

    /// Checks that power at `stab` ≥ `max` ≥ `opt` at both heights.
    pub fn check_ordering(&self) -> Result<(), VertexError> {
        for dh in DropHeight::ALL {
            let p = |y| self.vertex(y, dh).power;
            for (hi, lo) in [(Yield::Stab, Yield::Max), (Yield::Max, Yield::Opt)] {
                if p(hi) < p(lo) {
                    return Err(VertexError::Ordering {
                        height: dh,
                        upper: hi,
                        lower: lo,
                        upper_power: p(hi),
                        lower_power: p(lo),
                    });
                }
            }
        }
        Ok(())
    }

    /// Largest steady-state power in the table.
    pub fn max_power(&self) -> f64 {
        Yield::NORMAL
            .iter()
            .flat_map(|&y| DropHeight::ALL.map(|dh| self.vertex(y, dh).power))
            .fold(0.0, f64::max)
    }
}

/// Hydraulic description from which a [`VertexTable`] is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YieldCurve {
    /// Turbined flow at each yield, m³/s.
    pub flow: YieldValues<f64>,
    /// Efficiency at each yield, in (0, 1).
    pub efficiency: YieldValues<f64>,
    /// Drop height, m.
    pub head: HeightPair<f64>,
    /// Whether the unit takes part in secondary frequency control.
    #[serde(default)]
    pub regulates: bool,
}

/// Explicit vertex data or a curve to compute it from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VertexSource {
    Table(VertexTable),
    Curve(YieldCurve),
}

impl VertexSource {
    pub fn resolve(&self) -> Result<VertexTable, VertexError> {
        let table = match self {
            VertexSource::Table(t) => *t,
            VertexSource::Curve(c) => return make_vertex_table(c),
        };
        table.check_ordering()?;
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VertexError {
    #[error("{what} must be {expected}, got {value}")]
    InvalidInput {
        what: String,
        expected: &'static str,
        value: f64,
    },
    #[error(
        "power at yield {} ({upper_power}) is below yield {} ({lower_power}) at {} drop height",
        upper.as_str(), lower.as_str(), height.as_str()
    )]
    Ordering {
        height: DropHeight,
        upper: Yield,
        lower: Yield,
        upper_power: f64,
        lower_power: f64,
    },
}

/// Hydraulic power in MW for flow `q` (m³/s), head `h` (m) and efficiency `eta`.
pub fn hydraulic_power(q: f64, h: f64, eta: f64) -> f64 {
    WATER_DENSITY * GRAVITY * q * h * eta / 1e6
}

/// Computes every vertex of a generator from its yield curve.
///
/// Regulation headroom is the distance to the `max`/`min` yield power at
/// the same head when the unit regulates, and zero otherwise. The transient
/// margin is the distance to the `stab` power.
///
/// ```
/// use stablim::grid::{make_vertex_table, DropHeight, HeightPair, Yield, YieldCurve, YieldValues};
///
/// let curve = YieldCurve {
///     flow: YieldValues { min: 40.0, opt: 80.0, max: 100.0, stab: 110.0 },
///     efficiency: YieldValues { min: 0.8, opt: 0.93, max: 0.9, stab: 0.88 },
///     head: HeightPair { low: 90.0, high: 100.0 },
///     regulates: true,
/// };
/// let table = make_vertex_table(&curve).unwrap();
/// let p = table.vertex(Yield::Max, DropHeight::High).power;
/// assert!((p - 88.025).abs() < 1e-3);
/// ```
pub fn make_vertex_table(curve: &YieldCurve) -> Result<VertexTable, VertexError> {
    for y in Yield::ALL {
        let q = curve.flow.get(y);
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid(format!("flow at yield {}", y.as_str()), "positive", q));
        }
        let eta = curve.efficiency.get(y);
        if !(eta > 0.0 && eta < 1.0) {
            return Err(invalid(format!("efficiency at yield {}", y.as_str()), "in (0, 1)", eta));
        }
    }
    for dh in DropHeight::ALL {
        let h = curve.head.get(dh);
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("{} head", dh.as_str()), "positive", h));
        }
    }
    let power = |y: Yield, dh: DropHeight| {
        hydraulic_power(curve.flow.get(y), curve.head.get(dh), curve.efficiency.get(y))
    };
    let vertex = |y: Yield, dh: DropHeight| {
        let p = power(y, dh);
        let (up, down) = if curve.regulates {
            ((power(Yield::Max, dh) - p).max(0.0), (p - power(Yield::Min, dh)).max(0.0))
        } else {
            (0.0, 0.0)
        };
        Vertex {
            power: p,
            flow: curve.flow.get(y),
            sfc_up: up,
            sfc_down: down,
            pfc_margin: (power(Yield::Stab, dh) - p).max(0.0),
        }
    };
    let pair = |y| HeightPair {
        low: vertex(y, DropHeight::Low),
        high: vertex(y, DropHeight::High),
    };
    let table = YieldValues {
        min: pair(Yield::Min),
        opt: pair(Yield::Opt),
        max: pair(Yield::Max),
        stab: pair(Yield::Stab),
    };
    table.check_ordering()?;
    Ok(table)
}

fn invalid(what: String, expected: &'static str, value: f64) -> VertexError {
    VertexError::InvalidInput {
        what,
        expected,
        value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(q: f64, eta: f64) -> YieldCurve {
        YieldCurve {
            flow: YieldValues {
                min: q * 0.4,
                opt: q * 0.8,
                max: q,
                stab: q * 1.1,
            },
            efficiency: YieldValues {
                min: eta * 0.9,
                opt: eta,
                max: eta,
                stab: eta,
            },
            head: HeightPair {
                low: 80.0,
                high: 100.0,
            },
            regulates: false,
        }
    }

    #[test]
    fn reference_power() {
        let p = hydraulic_power(100.0, 100.0, 0.9);
        assert!((p - 997.0 * 9.81 * 100.0 * 100.0 * 0.9 / 1e6).abs() < 1e-12);
        assert!((p - 88.02).abs() < 0.01);
    }

    #[test]
    fn linear_in_efficiency_and_flow() {
        let a = hydraulic_power(50.0, 70.0, 0.45);
        assert!((hydraulic_power(50.0, 70.0, 0.9) - 2.0 * a).abs() < 1e-12);
        assert!((hydraulic_power(100.0, 70.0, 0.45) - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn table_ordering_holds() {
        let t = make_vertex_table(&curve(100.0, 0.9)).unwrap();
        for dh in DropHeight::ALL {
            assert!(t.vertex(Yield::Stab, dh).power >= t.vertex(Yield::Max, dh).power);
            assert!(t.vertex(Yield::Max, dh).power >= t.vertex(Yield::Opt, dh).power);
            assert_eq!(t.vertex(Yield::Opt, dh).sfc_up, 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut c = curve(100.0, 0.9);
        c.efficiency.opt = 1.0;
        assert!(matches!(make_vertex_table(&c), Err(VertexError::InvalidInput { .. })));
        let mut c = curve(100.0, 0.9);
        c.flow.stab = 50.0;
        assert!(matches!(
            make_vertex_table(&c),
            Err(VertexError::Ordering { upper: Yield::Stab, .. })
        ));
    }
}
