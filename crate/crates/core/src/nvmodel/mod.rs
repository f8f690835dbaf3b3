//! Rate-equation photophysics of the NV centre under CW optical and
//! microwave driving.
//!
//! Seven physical levels (ground g0, g−, g+, excited e0, e−, e+, singlet) plus
//! the intermediate pumping level 8. Level 8 is split internally into three
//! spin-tagged sub-channels so that optical excitation conserves spin; they
//! are summed back into one population on output.

pub mod graph;
pub mod odmr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::RateGraph;
pub use odmr::{
    odmr_lineshape, odmr_metrics, sensitivity, sensitivity_sweep, DriveConfig, DriveMode,
    ODMRCurve, OdmrMetrics, Sweep, SweepRow,
};

use crate::magnetics::NVFrame;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NvError {
    #[error("rate graph has no unique steady state")]
    SingularSystem,
    #[error("rates must be finite and non-negative")]
    InvalidRate,
    #[error("unknown state {0:?} in wiring")]
    UnknownState(String),
    #[error("unknown rate parameter {0:?} in wiring")]
    UnknownRate(String),
    #[error("sweep must span at least ±{needed} MHz (got {got})")]
    GridTooNarrow { needed: f64, got: f64 },
    #[error("curve has no dip")]
    NoDip,
    #[error("dip minimum at the sweep edge")]
    EdgeDip,
    #[error("sensitivity undefined for contrast {0} and baseline {1}")]
    DivisionDomain(f64, f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Population labels in output order.
pub const STATE_NAMES: [&str; 8] = ["g0", "g-", "g+", "e0", "e-", "e+", "singlet", "state8"];

const G0: usize = 0;
const GM: usize = 1;
const GP: usize = 2;
const SINGLET: usize = 6;
/// Internal node count: 7 physical levels + 3 spin-tagged level-8 channels.
const INTERNAL_STATES: usize = 10;

/// Steady-state populations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Populations(pub [f64; 8]);

impl Populations {
    pub fn g0(&self) -> f64 {
        self.0[0]
    }
    pub fn g_minus(&self) -> f64 {
        self.0[1]
    }
    pub fn g_plus(&self) -> f64 {
        self.0[2]
    }
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// One transition in a custom wiring. `rate` names a model parameter
/// (`gamma1`, `gamma4`, `gamma5`, `gamma6`, `gammap`, `gammar`) or is a number in MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WiringEdge {
    pub from: String,
    pub to: String,
    pub rate: RateRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateRef {
    Param(String),
    Mhz(f64),
}

/// Photophysical parameters. All rates in MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateModel {
    /// ground -> level 8 (optical pumping)
    #[serde(rename = "gamma1_MHz")]
    pub gamma1: f64,
    /// level 8 -> excited
    #[serde(rename = "gamma4_MHz")]
    pub gamma4: f64,
    /// excited ms=±1 -> singlet
    #[serde(rename = "gamma5_MHz")]
    pub gamma5: f64,
    /// excited ms=0 -> singlet
    #[serde(rename = "gamma6_MHz")]
    pub gamma6: f64,
    /// singlet -> ground ms=0
    #[serde(rename = "gammap_MHz")]
    pub gammap: f64,
    /// spin-conserving radiative decay excited -> ground
    #[serde(rename = "gammar_MHz")]
    pub gammar: f64,
    /// half-width of the microwave line
    #[serde(rename = "gammac_MHz")]
    pub gammac: f64,
    pub alpha: f64,
    pub beta: f64,
    /// optical saturation parameter
    pub s: f64,
    /// One unit of drive amplitude, rad/s.
    pub rabi_unit_rad_per_s: f64,
    /// Dimensionless efficiency of the incoherent microwave pumping rate.
    pub mw_coupling: f64,
    /// Replaces the default optical wiring when present. Microwave
    /// exchange g0 <-> g± is always added.
    pub wiring: Option<Vec<WiringEdge>>,
}

impl Default for RateModel {
    fn default() -> Self {
        RateModel {
            gamma1: 0.61,
            gamma4: 50.0,
            gamma5: 3.0,
            gamma6: 0.25,
            gammap: 4.87,
            gammar: 66.0,
            gammac: 3.0,
            alpha: 1.0,
            beta: 0.7,
            s: 0.026,
            rabi_unit_rad_per_s: 5.0e6,
            mw_coupling: 0.03,
            wiring: None,
        }
    }
}

fn internal_index(name: &str) -> Option<usize> {
    Some(match name {
        "g0" => 0,
        "g-" => 1,
        "g+" => 2,
        "e0" => 3,
        "e-" => 4,
        "e+" => 5,
        "singlet" => 6,
        "s8_0" => 7,
        "s8_-" => 8,
        "s8_+" => 9,
        _ => return None,
    })
}

impl RateModel {
    pub fn validate(&self) -> Result<(), NvError> {
        let rates = [
            self.gamma1,
            self.gamma4,
            self.gamma5,
            self.gamma6,
            self.gammap,
            self.gammar,
            self.gammac,
            self.s,
            self.rabi_unit_rad_per_s,
            self.mw_coupling,
        ];
        if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(NvError::InvalidRate);
        }
        if !(self.alpha >= self.beta && self.beta >= 0.0 && self.alpha.is_finite()) {
            return Err(NvError::InvalidModel("need alpha >= beta >= 0".into()));
        }
        if self.gammac == 0.0 {
            return Err(NvError::InvalidModel("gammac must be > 0".into()));
        }
        Ok(())
    }

    /// Cyclic frequency of one drive unit, MHz.
    pub fn rabi_unit_mhz(&self) -> f64 {
        self.rabi_unit_rad_per_s / (2.0 * std::f64::consts::PI) / 1e6
    }

    /// Incoherent ground-state exchange rate (MHz) for drive amplitude
    /// `omega` (drive units) at detuning `delta` (MHz).
    pub fn mw_rate(&self, omega: f64, delta: f64) -> f64 {
        let w = omega * self.rabi_unit_mhz();
        self.mw_coupling * w * w * self.gammac / (self.gammac * self.gammac + delta * delta)
    }

    fn param(&self, name: &str) -> Option<f64> {
        Some(match name {
            "gamma1" => self.gamma1,
            "gamma4" => self.gamma4,
            "gamma5" => self.gamma5,
            "gamma6" => self.gamma6,
            "gammap" => self.gammap,
            "gammar" => self.gammar,
            _ => return None,
        })
    }

    /// Optical part of the graph (everything except microwave exchange).
    pub fn optical_graph(&self) -> Result<RateGraph, NvError> {
        let mut g = RateGraph::new(INTERNAL_STATES);
        match &self.wiring {
            None => {
                for spin in 0..3 {
                    g.add(spin, 7 + spin, self.gamma1);
                    g.add(7 + spin, 3 + spin, self.gamma4);
                    g.add(3 + spin, spin, self.gammar);
                }
                g.add(4, SINGLET, self.gamma5);
                g.add(5, SINGLET, self.gamma5);
                g.add(3, SINGLET, self.gamma6);
                g.add(SINGLET, G0, self.gammap);
            }
            Some(edges) => {
                for e in edges {
                    let from = internal_index(&e.from).ok_or_else(|| NvError::UnknownState(e.from.clone()))?;
                    let to = internal_index(&e.to).ok_or_else(|| NvError::UnknownState(e.to.clone()))?;
                    let rate = match &e.rate {
                        RateRef::Mhz(v) => *v,
                        RateRef::Param(p) => self.param(p).ok_or_else(|| NvError::UnknownRate(p.clone()))?,
                    };
                    g.add(from, to, rate);
                }
            }
        }
        Ok(g)
    }

    /// Full graph including microwave exchange on both ground transitions.
    pub fn graph(&self, omega1: f64, omega2: f64, delta1: f64, delta2: f64) -> Result<RateGraph, NvError> {
        let mut g = self.optical_graph()?;
        let w1 = self.mw_rate(omega1, delta1);
        let w2 = self.mw_rate(omega2, delta2);
        g.add(G0, GM, w1);
        g.add(GM, G0, w1);
        g.add(G0, GP, w2);
        g.add(GP, G0, w2);
        Ok(g)
    }

    /// Stationary populations for drive amplitudes `omega1` (g0↔g−) and
    /// `omega2` (g0↔g+) at detunings `delta1`, `delta2` (MHz).
    pub fn steady_state(&self, omega1: f64, omega2: f64, delta1: f64, delta2: f64) -> Result<Populations, NvError> {
        self.validate()?;
        let n = self.graph(omega1, omega2, delta1, delta2)?.steady_state()?;
        let mut out = [0.0; 8];
        out[..7].copy_from_slice(&n[..7]);
        out[7] = n[7] + n[8] + n[9];
        Ok(Populations(out))
    }

    /// Photoluminescence rate from populations.
    pub fn pl_from(&self, n: &Populations) -> f64 {
        (self.alpha * n.g0() + self.beta * (n.g_minus() + n.g_plus())) * self.s / (1.0 + self.s)
    }

    /// PL rate at detunings `delta1`, `delta2` from the two ground transitions.
    pub fn pl_rate_detuned(&self, omega1: f64, omega2: f64, delta1: f64, delta2: f64) -> Result<f64, NvError> {
        Ok(self.pl_from(&self.steady_state(omega1, omega2, delta1, delta2)?))
    }

    /// Microwave-free baseline R₀.
    pub fn baseline(&self) -> Result<f64, NvError> {
        self.pl_rate_detuned(0.0, 0.0, 0.0, 0.0)
    }
}

/// PL rate for absolute tone frequencies `omega1_mhz`, `omega2_mhz` with the
/// resonances set by the axial field `b_par_g`.
pub fn pl_rate(
    model: &RateModel,
    rabi1: f64,
    rabi2: f64,
    omega1_mhz: f64,
    omega2_mhz: f64,
    b_par_g: f64,
) -> Result<f64, NvError> {
    let (f_minus, f_plus) = NVFrame::resonances(b_par_g);
    model.pl_rate_detuned(rabi1, rabi2, omega1_mhz - f_minus, omega2_mhz - f_plus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn populations_sum_to_one() {
        let m = RateModel::default();
        for (o1, o2, d1, d2) in [(0.0, 0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0), (3.0, 3.0, 2.0, -5.0)] {
            let n = m.steady_state(o1, o2, d1, d2).unwrap();
            assert!((n.total() - 1.0).abs() < 1e-12);
            assert!(n.0.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn no_drive_means_no_detuning_dependence() {
        let m = RateModel::default();
        let a = m.steady_state(0.0, 0.0, 0.0, 0.0).unwrap();
        let b = m.steady_state(0.0, 0.0, 17.0, -4.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn optical_pumping_polarizes_into_g0() {
        let n = RateModel::default().steady_state(0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(n.g0() > n.g_minus() && n.g0() > n.g_plus());
        assert_eq!(n.g_minus(), n.g_plus());
    }

    #[test]
    fn symmetric_dual_resonance() {
        let n = RateModel::default().steady_state(1.0, 1.0, 0.0, 0.0).unwrap();
        assert!((n.g_minus() - n.g_plus()).abs() < 1e-13 * n.g_minus(), "{} {}", n.g_minus(), n.g_plus());
    }

    #[test]
    fn zero_saturation_gives_zero_pl() {
        let m = RateModel {
            s: 0.0,
            ..RateModel::default()
        };
        assert_eq!(m.pl_rate_detuned(1.0, 1.0, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn dual_resonance_is_a_dip() {
        let m = RateModel::default();
        let r0 = m.baseline().unwrap();
        let (fm, fp) = NVFrame::resonances(400.0);
        let r = pl_rate(&m, 1.0, 1.0, fm, fp, 400.0).unwrap();
        assert!(r < r0);
    }

    #[test]
    fn default_config_roundtrips_through_json() {
        let m = RateModel::default();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"gamma1_MHz\":0.61"));
        let back: RateModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        let partial: RateModel = serde_json::from_str(r#"{"alpha": 0.9}"#).unwrap();
        assert_eq!(partial.alpha, 0.9);
        assert_eq!(partial.gamma4, 50.0);
    }

    #[test]
    fn explicit_wiring_equals_default() {
        let p = |s: &str| RateRef::Param(s.into());
        let e = |f: &str, t: &str, r: RateRef| WiringEdge {
            from: f.into(),
            to: t.into(),
            rate: r,
        };
        let mut edges = Vec::new();
        for (g, s8, ex) in [("g0", "s8_0", "e0"), ("g-", "s8_-", "e-"), ("g+", "s8_+", "e+")] {
            edges.push(e(g, s8, p("gamma1")));
            edges.push(e(s8, ex, p("gamma4")));
            edges.push(e(ex, g, p("gammar")));
        }
        edges.push(e("e-", "singlet", p("gamma5")));
        edges.push(e("e+", "singlet", p("gamma5")));
        edges.push(e("e0", "singlet", p("gamma6")));
        edges.push(e("singlet", "g0", RateRef::Mhz(4.87)));
        let custom = RateModel {
            wiring: Some(edges),
            ..RateModel::default()
        };
        let a = custom.steady_state(1.0, 0.5, 1.0, 2.0).unwrap();
        let b = RateModel::default().steady_state(1.0, 0.5, 1.0, 2.0).unwrap();
        for k in 0..8 {
            assert!((a.0[k] - b.0[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn cutting_the_pumping_path_is_singular() {
        let m = RateModel {
            gamma1: 0.0,
            ..RateModel::default()
        };
        // g-, g+ and g0 no longer connect to anything without microwaves;
        // the excited/singlet side drains into g0, so g± are separate closed classes
        assert_eq!(m.steady_state(0.0, 0.0, 0.0, 0.0), Err(NvError::SingularSystem));
    }
}
