//! Deterministic massive-MIMO rate model.
//!
//! The SINR approximation treats pilot contamination as the limiting factor:
//! with intercell interference factor `alpha` and `L` cells, the effective
//! load is `L_bar = 1 + alpha * (L - 1)` and the per-user SINR with transmit
//! SNR `rho` over `A` antennas is
//!
//! ```text
//! sinr = 1 / ( L_bar / (rho * A) + alpha * (L_bar - 1) )
//! ```
//!
//! which is strictly increasing in both `rho` and `A` and capped by the
//! contamination ceiling `1 / (alpha * (L_bar - 1))` whenever that term is
//! positive. Rates assume homogeneous subchannels with power split equally
//! across a user's assigned subchannels.

use crate::error::{AuctionError, Result};
use crate::types::{BidAtom, ResourceBundle};

/// Radio parameters shared by a whole scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    /// Subchannel bandwidth (Hz); rates are in bits/s times this scale.
    pub bandwidth: f64,
    /// Number of cells in the reuse cluster (>= 1).
    pub cells: u32,
    /// Intercell interference factor in [0, 1].
    pub alpha: f64,
    /// Watts represented by one integer power unit.
    pub power_unit: f64,
    /// Reference noise level converting power per subchannel to transmit SNR:
    /// rho = power_unit * units / (subchannels * noise_ref).
    pub noise_ref: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            bandwidth: 1.0,
            cells: 7,
            alpha: 0.1,
            power_unit: 1.0,
            noise_ref: 1.0,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells < 1 {
            return Err(AuctionError::Config("cells must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !self.alpha.is_finite() {
            return Err(AuctionError::Config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(AuctionError::Config("bandwidth must be positive".into()));
        }
        if !(self.power_unit.is_finite() && self.power_unit > 0.0) {
            return Err(AuctionError::Config("power_unit must be positive".into()));
        }
        if !(self.noise_ref.is_finite() && self.noise_ref > 0.0) {
            return Err(AuctionError::Config("noise_ref must be positive".into()));
        }
        Ok(())
    }

    /// Effective load: 1 + alpha * (L - 1), always >= 1.
    pub fn l_bar(&self) -> f64 {
        1.0 + self.alpha * (self.cells as f64 - 1.0)
    }

    /// Pilot contamination term alpha * (l_bar - 1), always >= 0.
    pub fn contamination(&self) -> f64 {
        self.alpha * (self.l_bar() - 1.0)
    }

    /// SINR ceiling imposed by pilot contamination, when one exists.
    pub fn sinr_ceiling(&self) -> Option<f64> {
        let cont = self.contamination();
        if cont > 0.0 {
            Some(1.0 / cont)
        } else {
            None
        }
    }

    /// Transmit SNR per subchannel when `power_units` are split equally over
    /// `subchannels` channels.
    fn rho(&self, power_units: u32, subchannels: u32) -> f64 {
        self.power_unit * power_units as f64 / (subchannels as f64 * self.noise_ref)
    }
}

/// Deterministic SINR approximation for transmit SNR `rho` over `antennas`.
pub fn sinr_approx(rho: f64, antennas: u32, config: &RadioConfig) -> Result<f64> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(AuctionError::Domain(format!(
            "transmit SNR must be positive, got {rho}"
        )));
    }
    if antennas == 0 {
        return Err(AuctionError::Domain("antennas must be >= 1".into()));
    }
    let denom = config.l_bar() / (rho * antennas as f64) + config.contamination();
    Ok(1.0 / denom)
}

/// Approximate achievable downlink rate for a user granted `subchannels`
/// subchannels and `power_units` total power units over `antennas` antennas.
/// Zero when any of the three is zero (no assignment, no power, no antennas).
pub fn rate(subchannels: u32, power_units: u32, antennas: u32, config: &RadioConfig) -> f64 {
    if subchannels == 0 || power_units == 0 || antennas == 0 {
        return 0.0;
    }
    let rho = config.rho(power_units, subchannels);
    // rho > 0 and antennas >= 1 here, so sinr_approx cannot fail.
    let sinr = sinr_approx(rho, antennas, config).expect("positive rho");
    subchannels as f64 * config.bandwidth * (1.0 + sinr).log2()
}

/// Minimum integer power units achieving `target_rate` on `subchannels`
/// subchannels with `antennas` antennas, or `None` when the target exceeds
/// the pilot-contamination ceiling (the profile must be omitted).
pub fn required_power(
    target_rate: f64,
    subchannels: u32,
    antennas: u32,
    config: &RadioConfig,
) -> Result<Option<u32>> {
    if subchannels == 0 {
        return Err(AuctionError::Domain("subchannels must be >= 1".into()));
    }
    if !(target_rate.is_finite() && target_rate > 0.0) {
        return Err(AuctionError::Domain(format!(
            "target rate must be positive, got {target_rate}"
        )));
    }
    if antennas == 0 {
        // No antennas, no rate: infeasible by physics rather than an error.
        return Ok(None);
    }
    // Needed per-subchannel SINR from inverting the rate formula.
    let gamma = (target_rate / (subchannels as f64 * config.bandwidth)).exp2() - 1.0;
    let cont = config.contamination();
    if cont > 0.0 && gamma >= 1.0 / cont {
        return Ok(None);
    }
    let inv = 1.0 / gamma - cont;
    let rho = config.l_bar() / (antennas as f64 * inv);
    let raw_units = rho * subchannels as f64 * config.noise_ref / config.power_unit;
    if !raw_units.is_finite() || raw_units > u32::MAX as f64 {
        return Ok(None);
    }
    let mut units = (raw_units.ceil() as u32).max(1);
    // Guard against rounding slop in the closed form, then step back down to
    // the minimal lattice point.
    while rate(subchannels, units, antennas, config) < target_rate {
        units += 1;
    }
    while units > 1 && rate(subchannels, units - 1, antennas, config) >= target_rate {
        units -= 1;
    }
    Ok(Some(units))
}

/// A user with a valuation slope and either an explicit bundle demand or an
/// implicit target rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserProfile {
    pub user_id: u32,
    /// Valuation slope: value = delta * rate.
    pub delta: f64,
    pub demand: Demand,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Demand {
    /// The user requests this exact bundle (antennas are implied by the
    /// serving MVNO and ignored here).
    Explicit(ResourceBundle),
    /// The user states a target rate in bits/s and leaves the resource split
    /// to the MVNO.
    Implicit { target_rate: f64 },
}

impl UserProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(AuctionError::Config(format!(
                "user {} has non-positive delta {}",
                self.user_id, self.delta
            )));
        }
        if let Demand::Implicit { target_rate } = self.demand {
            if !(target_rate.is_finite() && target_rate > 0.0) {
                return Err(AuctionError::Config(format!(
                    "user {} has non-positive target rate {}",
                    self.user_id, target_rate
                )));
            }
        }
        Ok(())
    }
}

/// Enumerates the resource-allocation profiles meeting an implicit user's
/// target rate: one candidate per subchannel count in `1..=max_subchannels`
/// whose required power is finite. All profiles carry the same value
/// `delta * target_rate` since the rate constraint binds with equality; the
/// returned list is the atom list of the user's XOR bid. Empty when the
/// target is unreachable at every width.
pub fn enumerate_profiles(
    user: &UserProfile,
    max_subchannels: u32,
    antennas: u32,
    config: &RadioConfig,
) -> Result<Vec<BidAtom>> {
    let target_rate = match user.demand {
        Demand::Implicit { target_rate } => target_rate,
        Demand::Explicit(_) => {
            return Err(AuctionError::Contract(format!(
                "user {} has an explicit demand; profiles are only enumerated for implicit users",
                user.user_id
            )))
        }
    };
    user.validate()?;
    let value = user.delta * target_rate;
    let mut atoms = Vec::new();
    for c in 1..=max_subchannels {
        if let Some(units) = required_power(target_rate, c, antennas, config)? {
            atoms.push(BidAtom::new(ResourceBundle::new(c, units, antennas), value));
        }
    }
    Ok(atoms)
}

/// Value of an explicit-demand user when served with `antennas` antennas:
/// delta times the achievable rate of the demanded bundle.
pub fn explicit_value(user: &UserProfile, antennas: u32, config: &RadioConfig) -> Result<f64> {
    let bundle = match user.demand {
        Demand::Explicit(bundle) => bundle,
        Demand::Implicit { .. } => {
            return Err(AuctionError::Contract(format!(
                "user {} has an implicit demand",
                user.user_id
            )))
        }
    };
    user.validate()?;
    Ok(user.delta * rate(bundle.subchannels, bundle.power, antennas, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(cells: u32, alpha: f64) -> RadioConfig {
        RadioConfig {
            cells,
            alpha,
            ..RadioConfig::default()
        }
    }

    #[test]
    fn sinr_collapses_to_rho_a_without_interference() {
        let c = cfg(5, 0.0);
        for (rho, a) in [(0.5, 10), (1.0, 100), (3.0, 7)] {
            let got = sinr_approx(rho, a, &c).unwrap();
            let want = rho * a as f64;
            assert!((got - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn sinr_hand_value() {
        // rho=1, A=100, L=7, alpha=0.1: l_bar=1.6, denom=0.016+0.06.
        let c = cfg(7, 0.1);
        let got = sinr_approx(1.0, 100, &c).unwrap();
        assert!((got - 1.0 / 0.076).abs() < 1e-9);
        assert!((got - 13.1579).abs() < 1e-3);
    }

    #[test]
    fn sinr_approaches_contamination_ceiling() {
        let c = cfg(7, 0.1);
        let ceiling = c.sinr_ceiling().unwrap();
        assert!((ceiling - 1.0 / 0.06).abs() < 1e-9);
        let near = sinr_approx(1e12, 100, &c).unwrap();
        assert!(near < ceiling);
        assert!(ceiling - near < 1e-3);
    }

    #[test]
    fn sinr_domain_errors() {
        let c = cfg(7, 0.1);
        assert!(sinr_approx(0.0, 10, &c).is_err());
        assert!(sinr_approx(-1.0, 10, &c).is_err());
        assert!(sinr_approx(1.0, 0, &c).is_err());
    }

    #[test]
    fn sinr_monotone_in_rho_and_antennas() {
        let c = cfg(7, 0.1);
        let mut prev = 0.0;
        for k in 1..50 {
            let v = sinr_approx(0.1 * k as f64, 64, &c).unwrap();
            assert!(v > prev);
            prev = v;
        }
        let mut prev = 0.0;
        for a in 1..50 {
            let v = sinr_approx(1.0, a, &c).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn rate_zero_without_subchannels_or_power() {
        let c = cfg(7, 0.1);
        assert_eq!(rate(0, 17, 100, &c), 0.0);
        assert_eq!(rate(3, 0, 100, &c), 0.0);
        assert_eq!(rate(2, 5, 0, &c), 0.0);
    }

    #[test]
    fn rate_hand_value() {
        // One subchannel, one power unit => rho = 1; compose the SINR example.
        let c = cfg(7, 0.1);
        let got = rate(1, 1, 100, &c);
        let want = (1.0f64 + 1.0 / 0.076).log2();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 3.8236).abs() < 1e-3);
    }

    #[test]
    fn rate_scales_linearly_when_power_tracks_subchannels() {
        let c = cfg(7, 0.1);
        let single = rate(1, 4, 64, &c);
        let double = rate(2, 8, 64, &c);
        assert!((double - 2.0 * single).abs() < 1e-12 * double.abs());
    }

    #[test]
    fn required_power_ceiling_dichotomy() {
        let c = cfg(7, 0.1);
        let ceiling_rate = (1.0f64 + c.sinr_ceiling().unwrap()).log2();
        let below = required_power(ceiling_rate * 0.999, 1, 100, &c).unwrap();
        assert!(below.is_some());
        let above = required_power(ceiling_rate * 1.001, 1, 100, &c).unwrap();
        assert!(above.is_none());
    }

    #[test]
    fn required_power_no_contamination_closed_form() {
        let c = cfg(1, 0.0);
        // gamma = 2^target - 1 over one unit-bandwidth subchannel; rho = gamma / A.
        let target: f64 = 5.0;
        let gamma = target.exp2() - 1.0;
        let a = 10;
        let units = required_power(target, 1, a, &c).unwrap().unwrap();
        let expected = (gamma / a as f64 * c.noise_ref / c.power_unit).ceil() as u32;
        assert_eq!(units, expected);
    }

    #[test]
    fn required_power_round_trip_is_minimal() {
        let c = cfg(7, 0.1);
        let ceiling = c.sinr_ceiling().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let subch = rng.gen_range(1..=6u32);
            let antennas = rng.gen_range(1..=200u32);
            let max_rate = subch as f64 * (1.0 + ceiling).log2();
            let target = rng.gen_range(0.05..0.98) * max_rate;
            let units = required_power(target, subch, antennas, &c)
                .unwrap()
                .expect("below ceiling");
            assert!(rate(subch, units, antennas, &c) >= target);
            if units > 1 {
                assert!(rate(subch, units - 1, antennas, &c) < target);
            }
        }
    }

    #[test]
    fn enumerate_profiles_empty_when_target_unreachable() {
        let c = cfg(7, 0.1);
        let ceiling_rate = (1.0f64 + c.sinr_ceiling().unwrap()).log2();
        let user = UserProfile {
            user_id: 0,
            delta: 1.0,
            demand: Demand::Implicit {
                target_rate: ceiling_rate * 5.0,
            },
        };
        // Targets above c * ceiling_rate for every c <= 4 are infeasible.
        assert!(enumerate_profiles(&user, 4, 100, &c).unwrap().is_empty());
    }

    #[test]
    fn enumerate_profiles_monotone_power_and_constant_value() {
        // A fine power lattice so the unit counts actually separate.
        let c = RadioConfig {
            power_unit: 0.001,
            ..cfg(7, 0.1)
        };
        let user = UserProfile {
            user_id: 3,
            delta: 2.0,
            demand: Demand::Implicit { target_rate: 2.5 },
        };
        let atoms = enumerate_profiles(&user, 3, 100, &c).unwrap();
        assert_eq!(atoms.len(), 3);
        for w in atoms.windows(2) {
            assert!(w[1].bundle.power < w[0].bundle.power);
            assert!(w[1].bundle.subchannels == w[0].bundle.subchannels + 1);
        }
        for atom in &atoms {
            assert_eq!(atom.value, 2.0 * 2.5);
            assert_eq!(atom.bundle.antennas, 100);
            // Forward oracle: each profile actually meets the target.
            assert!(rate(atom.bundle.subchannels, atom.bundle.power, 100, &c) >= 2.5);
        }
    }

    #[test]
    fn explicit_value_scales_rate() {
        let c = cfg(7, 0.1);
        let user = UserProfile {
            user_id: 1,
            delta: 2.0,
            demand: Demand::Explicit(ResourceBundle::new(1, 1, 0)),
        };
        let v = explicit_value(&user, 100, &c).unwrap();
        assert!((v - 7.6472).abs() < 2e-3);

        let empty = UserProfile {
            user_id: 2,
            delta: 2.0,
            demand: Demand::Explicit(ResourceBundle::EMPTY),
        };
        assert_eq!(explicit_value(&empty, 100, &c).unwrap(), 0.0);
    }

    #[test]
    fn explicit_value_increases_with_antennas() {
        let c = cfg(7, 0.1);
        let user = UserProfile {
            user_id: 1,
            delta: 1.0,
            demand: Demand::Explicit(ResourceBundle::new(2, 6, 0)),
        };
        let mut prev = 0.0;
        for a in [1, 2, 8, 32, 128] {
            let v = explicit_value(&user, a, &c).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn profile_enumeration_rejects_explicit_users() {
        let user = UserProfile {
            user_id: 0,
            delta: 1.0,
            demand: Demand::Explicit(ResourceBundle::new(1, 1, 0)),
        };
        assert!(enumerate_profiles(&user, 3, 10, &RadioConfig::default()).is_err());
    }
}
