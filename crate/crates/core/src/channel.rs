//! 3GPP UMi pathloss, UPA array responses and synthesis of the CSI triple
//! `{h_direct, g_ris, h_rb}`.
//!
//! Array conventions: the BS array lies in the xz-plane (boresight +y), the
//! RIS in the xy-plane (boresight −z, facing the ground). Elevation is the
//! angle from boresight, azimuth is measured in the array plane from its
//! first axis. Element spacing is half a wavelength.
//!
//! RIS elements are indexed `l = p·L + q` where `p` is the RIS column (first
//! in-plane axis) and `q` the position inside that column, so the `L`
//! elements of column `p` are contiguous.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgeom::{is_blocked, Deployment, ScenarioConfig};
use crate::{rng, CMat, C64};

pub const SPEED_OF_LIGHT: f64 = 3e8;
/// Effective environment height for UMi.
pub const ENV_HEIGHT: f64 = 1.0;
pub const MIN_D2D: f64 = 10.0;
pub const MAX_D2D: f64 = 5000.0;
pub const HALF_WAVELENGTH: f64 = 0.5;

/// `d'_BP = 4 (h_tx − h_E)(h_rx − h_E) f_c / c`, with `fc_hz` in Hz.
pub fn breakpoint_distance(h_tx: f64, h_rx: f64, fc_hz: f64) -> Result<f64> {
    if !(h_tx > ENV_HEIGHT) {
        return Err(Error::Domain {
            quantity: "h_tx",
            value: h_tx,
            domain: "(1 m, inf)",
        });
    }
    if !(h_rx > ENV_HEIGHT) {
        return Err(Error::Domain {
            quantity: "h_rx",
            value: h_rx,
            domain: "(1 m, inf)",
        });
    }
    Ok(4.0 * (h_tx - ENV_HEIGHT) * (h_rx - ENV_HEIGHT) * fc_hz / SPEED_OF_LIGHT)
}

fn check_distances(d2d: f64, d3d: f64) -> Result<()> {
    if !(MIN_D2D..=MAX_D2D).contains(&d2d) {
        return Err(Error::Domain {
            quantity: "d2d",
            value: d2d,
            domain: "[10 m, 5000 m]",
        });
    }
    if !(d3d >= d2d * (1.0 - 1e-12)) {
        return Err(Error::Domain {
            quantity: "d3d",
            value: d3d,
            domain: "[d2d, inf)",
        });
    }
    Ok(())
}

fn los_without_shadow(d2d: f64, d3d: f64, fc_ghz: f64, h_bs: f64, h_ue: f64) -> Result<f64> {
    check_distances(d2d, d3d)?;
    let d_bp = breakpoint_distance(h_bs, h_ue, fc_ghz * 1e9)?;
    let pl = if d2d <= d_bp {
        32.4 + 21.0 * d3d.log10() + 20.0 * fc_ghz.log10()
    } else {
        32.4 + 40.0 * d3d.log10() + 20.0 * fc_ghz.log10()
            - 9.5 * (d_bp * d_bp + (h_bs - h_ue).powi(2)).log10()
    };
    Ok(pl)
}

/// UMi LOS pathloss in dB (`fc_ghz` in GHz, distances and heights in meters).
pub fn pathloss_umi_los(
    d2d: f64,
    d3d: f64,
    fc_ghz: f64,
    h_bs: f64,
    h_ue: f64,
    shadow_db: f64,
) -> Result<f64> {
    Ok(los_without_shadow(d2d, d3d, fc_ghz, h_bs, h_ue)? + shadow_db)
}

/// UMi NLOS pathloss in dB: `max(PL_LOS, PL'_NLOS)` with the shadow term
/// added once, outside the max.
pub fn pathloss_umi_nlos(
    d2d: f64,
    d3d: f64,
    fc_ghz: f64,
    h_bs: f64,
    h_ue: f64,
    shadow_db: f64,
) -> Result<f64> {
    let los = los_without_shadow(d2d, d3d, fc_ghz, h_bs, h_ue)?;
    let nlos = 35.3 * d3d.log10() + 22.4 + 21.3 * fc_ghz.log10() - 0.3 * (h_ue - 1.5);
    Ok(los.max(nlos) + shadow_db)
}

/// Uniform planar array response over a `rows × cols` grid, row-major.
pub fn steering_vector_upa(
    rows: usize,
    cols: usize,
    elevation: f64,
    azimuth: f64,
    spacing_wavelengths: f64,
) -> DVector<C64> {
    let u = elevation.sin() * azimuth.cos();
    let v = elevation.sin() * azimuth.sin();
    let k = 2.0 * PI * spacing_wavelengths;
    DVector::from_iterator(
        rows * cols,
        (0..rows).flat_map(|p| {
            (0..cols).map(move |q| C64::from_polar(1.0, k * (p as f64 * u + q as f64 * v)))
        }),
    )
}

/// Elevation/azimuth pair in an array's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub elevation: f64,
    pub azimuth: f64,
}

/// Orientation of a planar array: two in-plane axes and the boresight.
#[derive(Debug, Clone, Copy)]
pub struct ArrayFrame {
    pub axis_p: [f64; 3],
    pub axis_q: [f64; 3],
    pub boresight: [f64; 3],
}

impl ArrayFrame {
    pub const XZ_PLANE: ArrayFrame = ArrayFrame {
        axis_p: [1.0, 0.0, 0.0],
        axis_q: [0.0, 0.0, 1.0],
        boresight: [0.0, 1.0, 0.0],
    };
    pub const XY_PLANE_DOWN: ArrayFrame = ArrayFrame {
        axis_p: [1.0, 0.0, 0.0],
        axis_q: [0.0, 1.0, 0.0],
        boresight: [0.0, 0.0, -1.0],
    };

    /// Direction of `to` as seen from an array located at `from`.
    pub fn direction(&self, from: [f64; 3], to: [f64; 3]) -> Direction {
        let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
        let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let dot = |a: &[f64; 3]| (a[0] * d[0] + a[1] * d[1] + a[2] * d[2]) / norm;
        Direction {
            elevation: dot(&self.boresight).clamp(-1.0, 1.0).acos(),
            azimuth: dot(&self.axis_q).atan2(dot(&self.axis_p)),
        }
    }
}

/// Most-square factorization `rows × cols = n` with `rows ≤ cols`.
pub fn array_shape(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt().floor() as usize;
    while rows > 1 && !n.is_multiple_of(rows) {
        rows -= 1;
    }
    let rows = rows.max(1);
    (rows, n / rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LinkState {
    pub los: bool,
    /// The 2D distance was below the model's 10 m floor and was clamped.
    pub clamped: bool,
}

/// Per-sample CSI. `h_direct` is K×N, `g_ris` is K×L² with row k holding
/// `g_kᴴ`, `h_rb` is L²×N.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h_direct: CMat,
    pub g_ris: CMat,
    pub h_rb: CMat,
    pub direct_links: Vec<LinkState>,
    pub ris_links: Vec<LinkState>,
}

impl ChannelSet {
    pub fn num_ues(&self) -> usize {
        self.h_direct.nrows()
    }

    pub fn num_antennas(&self) -> usize {
        self.h_direct.ncols()
    }

    pub fn ris_elements(&self) -> usize {
        self.h_rb.nrows()
    }

    /// RIS side `L`, if the element count is a perfect square.
    pub fn ris_side(&self) -> Option<usize> {
        let n = self.ris_elements();
        let side = (n as f64).sqrt().round() as usize;
        (side * side == n).then_some(side)
    }

    pub fn validate(&self) -> Result<()> {
        let (k, n, l2) = (self.num_ues(), self.num_antennas(), self.ris_elements());
        let check = |context, expected, found| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::Dimension {
                    context,
                    expected,
                    found,
                })
            }
        };
        check("g_ris rows", k, self.g_ris.nrows())?;
        check("g_ris cols", l2, self.g_ris.ncols())?;
        check("h_rb cols", n, self.h_rb.ncols())?;
        let finite = |m: &CMat| m.iter().all(|c| c.re.is_finite() && c.im.is_finite());
        if !(finite(&self.h_direct) && finite(&self.g_ris) && finite(&self.h_rb)) {
            return Err(Error::InvalidInput("non-finite channel entry".into()));
        }
        Ok(())
    }
}

struct Link {
    pathloss_db: f64,
    state: LinkState,
}

fn link_pathloss(
    config: &ScenarioConfig,
    tx: [f64; 3],
    rx: [f64; 3],
    los: bool,
    shadow_db: f64,
) -> Result<Link> {
    let dh = tx[2] - rx[2];
    let raw_d2d = ((tx[0] - rx[0]).powi(2) + (tx[1] - rx[1]).powi(2)).sqrt();
    let clamped = raw_d2d < MIN_D2D;
    let d2d = raw_d2d.max(MIN_D2D);
    let d3d = (d2d * d2d + dh * dh).sqrt();
    let (h_tx, h_rx) = (tx[2], rx[2]);
    let pathloss_db = if los {
        pathloss_umi_los(d2d, d3d, config.carrier_freq, h_tx, h_rx, shadow_db)?
    } else {
        pathloss_umi_nlos(d2d, d3d, config.carrier_freq, h_tx, h_rx, shadow_db)?
    };
    Ok(Link {
        pathloss_db,
        state: LinkState { los, clamped },
    })
}

fn amplitude(pathloss_db: f64) -> f64 {
    10f64.powf(-pathloss_db / 20.0)
}

/// Synthesizes the CSI for one deployment. Deterministic in `seed`; each
/// link gets its own log-normal shadowing draw.
pub fn synth_channels(
    config: &ScenarioConfig,
    deployment: &Deployment,
    seed: u64,
) -> Result<ChannelSet> {
    config.validate()?;
    let k = deployment.ue_positions.len();
    if k == 0 {
        return Err(Error::InvalidInput("deployment has no users".into()));
    }
    let n = config.n_bs_antennas;
    let side = config.ris_side;
    let l2 = side * side;
    let (bs_rows, bs_cols) = array_shape(n);
    let bs = config.bs_position;
    let ris = config.ris_position;

    let mut rng = rng::stream(seed, rng::STREAM_SHADOW);
    let normal = Normal::new(0.0, config.shadow_sigma).expect("finite sigma");
    let mut shadow = || normal.sample(&mut rng);

    let bs_array = |dir: Direction| {
        steering_vector_upa(
            bs_rows,
            bs_cols,
            dir.elevation,
            dir.azimuth,
            HALF_WAVELENGTH,
        )
    };
    let ris_array = |dir: Direction| {
        steering_vector_upa(side, side, dir.elevation, dir.azimuth, HALF_WAVELENGTH)
    };

    // BS → RIS: fixed installations, always LOS.
    let feed = link_pathloss(config, bs, ris, true, shadow())?;
    let a_ris = ris_array(ArrayFrame::XY_PLANE_DOWN.direction(ris, bs));
    let a_bs = bs_array(ArrayFrame::XZ_PLANE.direction(bs, ris));
    let h_rb = (a_ris * a_bs.adjoint()) * C64::from(amplitude(feed.pathloss_db));

    let mut h_direct = DMatrix::zeros(k, n);
    let mut g_ris = DMatrix::zeros(k, l2);
    let mut direct_links = Vec::with_capacity(k);
    let mut ris_links = Vec::with_capacity(k);
    for (row, &ue) in deployment.ue_positions.iter().enumerate() {
        let los = !is_blocked(bs, ue, &deployment.blockages);
        let link = link_pathloss(config, bs, ue, los, shadow())?;
        let a = bs_array(ArrayFrame::XZ_PLANE.direction(bs, ue));
        let beta = amplitude(link.pathloss_db);
        for (col, v) in a.iter().enumerate() {
            h_direct[(row, col)] = v.conj() * beta;
        }
        direct_links.push(link.state);

        let los = !is_blocked(ris, ue, &deployment.blockages);
        let link = link_pathloss(config, ris, ue, los, shadow())?;
        let a = ris_array(ArrayFrame::XY_PLANE_DOWN.direction(ris, ue));
        let beta = amplitude(link.pathloss_db);
        for (col, v) in a.iter().enumerate() {
            g_ris[(row, col)] = v.conj() * beta;
        }
        ris_links.push(link.state);
    }

    let set = ChannelSet {
        h_direct,
        g_ris,
        h_rb,
        direct_links,
        ris_links,
    };
    set.validate()?;
    Ok(set)
}
