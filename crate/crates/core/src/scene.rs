//! Scenario configuration, geometry, unit conversions and seeded randomness.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// How per-user symbol amplitudes are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolPower {
    /// `rho_k = sqrt(P0 / K) * ||h_PT,k||`
    Matched,
    /// `rho_k = 1`
    Unit,
}

impl SymbolPower {
    pub fn as_str(self) -> &'static str {
        match self {
            SymbolPower::Matched => "matched",
            SymbolPower::Unit => "unit",
        }
    }
}

impl std::str::FromStr for SymbolPower {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matched" => Ok(SymbolPower::Matched),
            "unit" => Ok(SymbolPower::Unit),
            other => Err(Error::invalid(format!("unknown symbol power mode `{other}`"))),
        }
    }
}

/// Every physical and algorithmic parameter of one scenario.
///
/// Positions are in meters, angles in degrees, powers in dBm.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_tx: usize,
    pub n_users: usize,
    pub frame_len: usize,
    pub p0_dbm: f64,
    pub kappa: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    /// Antenna / element spacing in wavelengths.
    pub array_spacing: f64,
    pub bs_position: Vec3,
    pub dris_position: Vec3,
    pub user_region_center: Vec3,
    pub user_region_radius: f64,
    pub target_angle_deg: f64,
    /// Range of the sensing target from the BS, in the array plane.
    pub target_range_m: f64,
    pub echo_snr_db: f64,
    pub chi: f64,
    pub symbol_power: SymbolPower,
    /// Feed the trade-off solver a gain-normalized channel so that kappa
    /// weighs MUI and sensing distance on comparable scales.
    pub normalize_tradeoff: bool,
    pub music_grid_step_deg: f64,
    /// DRIS reflection redraws per echo frame.
    pub sensing_redraws: usize,
    pub master_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_tx: 16,
            n_users: 8,
            frame_len: 18,
            p0_dbm: 2.0,
            kappa: 0.2,
            bandwidth_hz: 180e3,
            carrier_hz: 3.5e9,
            array_spacing: 0.5,
            bs_position: [0.0, 0.0, 3.0],
            dris_position: [2.0, 0.0, 2.0],
            user_region_center: [0.0, 180.0, 0.0],
            user_region_radius: 20.0,
            target_angle_deg: 17.0,
            target_range_m: 100.0,
            echo_snr_db: 10.0,
            chi: 1.0,
            symbol_power: SymbolPower::Matched,
            normalize_tradeoff: true,
            music_grid_step_deg: 0.1,
            sensing_redraws: 1,
            master_seed: 20_240_601,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(key, msg))
            }
        };
        check(self.n_tx >= 1, "n_tx", "must be >= 1")?;
        check(self.n_users >= 1, "n_users", "must be >= 1")?;
        check(self.frame_len >= 1, "frame_len", "must be >= 1")?;
        check(self.n_tx <= self.frame_len, "n_tx", "must not exceed frame_len")?;
        check(self.p0_dbm.is_finite(), "p0_dbm", "must be finite")?;
        check((0.0..=1.0).contains(&self.kappa), "kappa", "must lie in [0, 1]")?;
        check((0.0..=1.0).contains(&self.chi), "chi", "must lie in [0, 1]")?;
        check(self.bandwidth_hz > 0.0, "bandwidth_hz", "must be > 0")?;
        check(self.carrier_hz > 0.0, "carrier_hz", "must be > 0")?;
        check(self.array_spacing > 0.0, "array_spacing", "must be > 0")?;
        check(
            self.user_region_radius >= 0.0 && self.user_region_radius.is_finite(),
            "user_region_radius",
            "must be finite and >= 0",
        )?;
        check(self.target_range_m > 0.0, "target_range_m", "must be > 0")?;
        check(self.echo_snr_db.is_finite(), "echo_snr_db", "must be finite")?;
        check(
            self.music_grid_step_deg > 0.0 && self.music_grid_step_deg <= 90.0,
            "music_grid_step_deg",
            "must lie in (0, 90]",
        )?;
        check(self.sensing_redraws >= 1, "sensing_redraws", "must be >= 1")?;
        check(
            self.sensing_redraws <= self.frame_len,
            "sensing_redraws",
            "must not exceed frame_len",
        )?;
        check(
            distance(&self.bs_position, &self.dris_position) > 0.0,
            "dris_position",
            "must differ from bs_position",
        )?;
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn p0_watts(&self) -> f64 {
        dbm_to_watts(self.p0_dbm)
    }

    /// Communication noise variance in watts.
    pub fn noise_watts(&self) -> Result<f64> {
        Ok(dbm_to_watts(noise_variance_dbm(self.bandwidth_hz)?))
    }

    pub fn target_angle_rad(&self) -> f64 {
        self.target_angle_deg.to_radians()
    }

    /// Target position: `target_range_m` from the BS along the target angle,
    /// measured from array broadside (+y) toward the array axis (+x).
    pub fn target_position(&self) -> Vec3 {
        let th = self.target_angle_rad();
        let b = self.bs_position;
        [
            b[0] + self.target_range_m * th.sin(),
            b[1] + self.target_range_m * th.cos(),
            b[2],
        ]
    }
}

/// User positions and the link distances derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub user_positions: Vec<Vec3>,
    pub distances_direct: Vec<f64>,
    pub distances_dris_user: Vec<f64>,
    pub distance_bs_dris: f64,
}

/// Draws users i.i.d. uniform over the horizontal disk of the user region.
pub fn place_users(config: &ScenarioConfig, stream: &mut RandomStream) -> Placement {
    let c = config.user_region_center;
    let user_positions: Vec<Vec3> = (0..config.n_users)
        .map(|_| {
            let r = config.user_region_radius * stream.random::<f64>().sqrt();
            let a = std::f64::consts::TAU * stream.random::<f64>();
            [c[0] + r * a.cos(), c[1] + r * a.sin(), c[2]]
        })
        .collect();
    let distances_direct = user_positions
        .iter()
        .map(|u| distance(u, &config.bs_position))
        .collect();
    let distances_dris_user = user_positions
        .iter()
        .map(|u| distance(u, &config.dris_position))
        .collect();
    Placement {
        user_positions,
        distances_direct,
        distances_dris_user,
        distance_bs_dris: distance(&config.bs_position, &config.dris_position),
    }
}

/// Thermal noise floor `-170 + 10 log10(BW)` in dBm.
pub fn noise_variance_dbm(bandwidth_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
        return Err(Error::invalid(format!(
            "bandwidth must be positive and finite, got {bandwidth_hz}"
        )));
    }
    Ok(-170.0 + 10.0 * bandwidth_hz.log10())
}

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

pub fn db_to_linear(g_db: f64) -> f64 {
    10f64.powf(g_db / 10.0)
}

/// A reproducible random substream.
///
/// Streams remember their 32-byte seed so they can be forked into further
/// independent substreams without consuming draws.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: [u8; 32],
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self {
            seed,
            rng: ChaCha20Rng::from_seed(seed),
        }
    }

    /// Child stream keyed by `(tag, index)`; independent of how many draws
    /// the parent has already produced.
    pub fn fork(&self, tag: &str, index: u64) -> RandomStream {
        RandomStream::from_seed(hash_seed(&self.seed, tag, index))
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn hash_seed(parent: &[u8], tag: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"disco-isac/stream/v1");
    h.update((parent.len() as u64).to_le_bytes());
    h.update(parent);
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

/// Substream for `(master_seed, purpose_tag, index)`.
pub fn derive_stream(master_seed: u64, purpose_tag: &str, index: u64) -> RandomStream {
    RandomStream::from_seed(hash_seed(&master_seed.to_le_bytes(), purpose_tag, index))
}
