//! Lattice models: semi-infinite leads described by principal-layer blocks
//! (either one of the shipped presets or explicit matrices), the device
//! region between them, and the JSON configuration format that ties the
//! three together.
//!
//! Block convention: `h01` is the hopping from layer `m` to layer `m + 1`
//! along the global transport direction (left to right). Energies and
//! hoppings are dimensionless, in units of a reference hopping `t = 1`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_defect, hermitian_eigen, CMatrix, C64};

/// Elementwise tolerance for Hermiticity of on-site blocks.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Single-orbital chain: `eps`, hopping `t`.
    Chain,
    /// Two-site cell: on-site `eps_a`, `eps_b`; intra-cell `t1`, inter-cell `t2`.
    DimerChain,
    /// Two-leg ladder: leg hopping `t`, rung `t_perp`, on-site `eps`, and a
    /// single diagonal inter-layer hopping `t_diag` (leg 0 to leg 1).
    Ladder,
    /// Square-lattice strip of `width` sites, optionally periodic across.
    SquareStrip,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Chain => "chain",
            Preset::DimerChain => "dimer_chain",
            Preset::Ladder => "ladder",
            Preset::SquareStrip => "square_strip",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        match name {
            "chain" => Some(Preset::Chain),
            "dimer_chain" => Some(Preset::DimerChain),
            "ladder" => Some(Preset::Ladder),
            "square_strip" => Some(Preset::SquareStrip),
            _ => None,
        }
    }

    /// Accepted parameters with their defaults (`None` = required).
    fn parameters(self) -> &'static [(&'static str, Option<f64>)] {
        match self {
            Preset::Chain => &[("t", Some(1.0)), ("eps", Some(0.0))],
            Preset::DimerChain => &[
                ("t1", None),
                ("t2", None),
                ("eps_a", Some(0.0)),
                ("eps_b", Some(0.0)),
            ],
            Preset::Ladder => &[
                ("t", Some(1.0)),
                ("t_perp", Some(1.0)),
                ("eps", Some(0.0)),
                ("t_diag", Some(0.0)),
            ],
            Preset::SquareStrip => &[
                ("width", None),
                ("t", Some(1.0)),
                ("eps", Some(0.0)),
                ("cell", Some(1.0)),
            ],
        }
    }
}

/// Which sublattice of a dimer cell comes first in the layer ordering.
///
/// For a right-hand lead the first site of a cell faces the device; for a
/// left-hand lead it is the last site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Termination {
    #[default]
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transverse {
    pub width: usize,
    pub periodic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeadKind {
    Preset(Preset),
    Explicit { h00: CMatrix, h01: CMatrix },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub kind: LeadKind,
    pub params: BTreeMap<String, f64>,
    pub transverse: Option<Transverse>,
    pub termination: Termination,
}

/// Principal-layer blocks of a semi-infinite periodic lead, possibly at a
/// transverse Bloch momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianBlocks {
    pub h00: CMatrix,
    pub h01: CMatrix,
    pub k: Option<f64>,
}

impl HamiltonianBlocks {
    pub fn new(h00: CMatrix, h01: CMatrix) -> Result<Self> {
        check_square("h00", &h00)?;
        check_square("h01", &h01)?;
        if h00.shape() != h01.shape() {
            return Err(Error::DimensionMismatch {
                first: "h00".into(),
                first_dims: h00.shape(),
                second: "h01".into(),
                second_dims: h01.shape(),
            });
        }
        check_hermitian("h00", &h00)?;
        Ok(Self { h00, h01, k: None })
    }

    pub fn n(&self) -> usize {
        self.h00.nrows()
    }

    pub fn is_real(&self) -> bool {
        crate::linalg::is_real(&self.h00) && crate::linalg::is_real(&self.h01)
    }

    /// Bulk Bloch Hamiltonian `h00 + h01 e^{iq} + h01^H e^{-iq}`.
    pub fn bloch_hamiltonian(&self, q: f64) -> CMatrix {
        let ph = C64::from_polar(1.0, q);
        &self.h00 + self.h01.scale(1.0).map(|z| z * ph) + self.h01.adjoint().map(|z| z * ph.conj())
    }

    /// Energy interval of each bulk band, sampled on `nq` momenta.
    pub fn band_intervals(&self, nq: usize) -> Vec<(f64, f64)> {
        let mut bands = vec![(f64::INFINITY, f64::NEG_INFINITY); self.n()];
        for j in 0..nq.max(2) {
            let q = -PI + 2.0 * PI * j as f64 / (nq.max(2) - 1) as f64;
            let eig = hermitian_eigen(&self.bloch_hamiltonian(q));
            for (b, &e) in bands.iter_mut().zip(&eig.values) {
                b.0 = b.0.min(e);
                b.1 = b.1.max(e);
            }
        }
        bands
    }

    /// Energy range covered by the bulk bands, sampled on `nq` momenta.
    pub fn band_range(&self, nq: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..nq.max(2) {
            let q = -PI + 2.0 * PI * j as f64 / (nq.max(2) - 1) as f64;
            let eig = hermitian_eigen(&self.bloch_hamiltonian(q));
            lo = lo.min(eig.values[0]);
            hi = hi.max(*eig.values.last().unwrap());
        }
        (lo, hi)
    }
}

/// Map a momentum into `[-pi, pi)`.
pub fn fold_momentum(k: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let f = k - two_pi * ((k + PI) / two_pi).floor();
    if f >= PI {
        f - two_pi
    } else {
        f
    }
}

impl LatticeSpec {
    pub fn preset(preset: Preset, params: &[(&str, f64)]) -> Result<Self> {
        let spec = LatticeSpec {
            kind: LeadKind::Preset(preset),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            transverse: None,
            termination: Termination::A,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn explicit(h00: CMatrix, h01: CMatrix) -> Result<Self> {
        let spec = LatticeSpec {
            kind: LeadKind::Explicit { h00, h01 },
            params: BTreeMap::new(),
            transverse: None,
            termination: Termination::A,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_transverse(mut self, width: usize, periodic: bool) -> Result<Self> {
        self.transverse = Some(Transverse { width, periodic });
        self.validate()?;
        Ok(self)
    }

    pub fn with_termination(mut self, termination: Termination) -> Self {
        self.termination = termination;
        self
    }

    pub fn is_periodic(&self) -> bool {
        self.transverse.is_some_and(|t| t.periodic)
    }

    fn param(&self, name: &str) -> f64 {
        if let Some(v) = self.params.get(name) {
            return *v;
        }
        if let LeadKind::Preset(p) = self.kind {
            if let Some((_, Some(d))) = p.parameters().iter().find(|(n, _)| *n == name) {
                return *d;
            }
        }
        f64::NAN
    }

    fn strip_width(&self) -> usize {
        match self.transverse {
            Some(t) => t.width,
            None => self.param("width") as usize,
        }
    }

    /// Transverse momenta of the periodic strip, `2 pi j cell / width` folded
    /// into `[-pi, pi)`. Empty for non-periodic leads.
    pub fn k_points(&self) -> Vec<f64> {
        if !self.is_periodic() {
            return Vec::new();
        }
        let cells = self.strip_width() / self.param("cell") as usize;
        (0..cells)
            .map(|j| fold_momentum(2.0 * PI * j as f64 / cells as f64))
            .collect()
    }

    /// Dimension of one principal layer (per K for periodic leads).
    pub fn surface_dim(&self) -> usize {
        match (&self.kind, self.is_periodic()) {
            (LeadKind::Explicit { h00, .. }, _) => h00.nrows(),
            (LeadKind::Preset(Preset::Chain), _) => 1,
            (LeadKind::Preset(Preset::DimerChain), _) | (LeadKind::Preset(Preset::Ladder), _) => 2,
            (LeadKind::Preset(Preset::SquareStrip), true) => self.param("cell") as usize,
            (LeadKind::Preset(Preset::SquareStrip), false) => self.strip_width(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            LeadKind::Explicit { h00, h01 } => {
                HamiltonianBlocks::new(h00.clone(), h01.clone())?;
                if self.transverse.is_some_and(|t| t.periodic) {
                    return Err(Error::InvalidParameter {
                        name: "transverse".into(),
                        message: "explicit blocks cannot be transversely periodic".into(),
                    });
                }
                Ok(())
            }
            LeadKind::Preset(p) => self.validate_preset(*p),
        }
    }

    fn validate_preset(&self, preset: Preset) -> Result<()> {
        let allowed = preset.parameters();
        for (name, value) in &self.params {
            if !allowed.iter().any(|(n, _)| n == name) {
                return Err(Error::InvalidParameter {
                    name: name.clone(),
                    message: format!("not a parameter of preset `{}`", preset.name()),
                });
            }
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name: name.clone(),
                    message: "must be finite".into(),
                });
            }
        }
        for (name, default) in allowed {
            let needed = default.is_none() && !(preset == Preset::SquareStrip && *name == "width" && self.transverse.is_some());
            if needed && !self.params.contains_key(*name) {
                return Err(Error::InvalidParameter {
                    name: name.to_string(),
                    message: format!("required by preset `{}`", preset.name()),
                });
            }
        }
        let positive = |name: &str| -> Result<()> {
            if self.param(name) > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name: name.into(),
                    message: "must be positive".into(),
                })
            }
        };
        let whole = |name: &str, v: f64| -> Result<()> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name: name.into(),
                    message: format!("must be a positive integer, got {v}"),
                })
            }
        };
        if preset != Preset::SquareStrip && self.transverse.is_some() {
            return Err(Error::InvalidParameter {
                name: "transverse".into(),
                message: format!("preset `{}` has no transverse direction", preset.name()),
            });
        }
        match preset {
            Preset::Chain => positive("t")?,
            Preset::DimerChain => {
                positive("t1")?;
                positive("t2")?;
            }
            Preset::Ladder => {
                positive("t")?;
                if self.param("t_perp") < 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "t_perp".into(),
                        message: "must be non-negative".into(),
                    });
                }
            }
            Preset::SquareStrip => {
                positive("t")?;
                if let Some(w) = self.params.get("width") {
                    whole("width", *w)?;
                    if let Some(t) = self.transverse {
                        if t.width as f64 != *w {
                            return Err(Error::InvalidParameter {
                                name: "width".into(),
                                message: format!("params.width = {w} disagrees with transverse.width = {}", t.width),
                            });
                        }
                    }
                }
                whole("width", self.strip_width() as f64)?;
                let cell = self.param("cell");
                whole("cell", cell)?;
                if self.is_periodic() && self.strip_width() % (cell as usize) != 0 {
                    return Err(Error::InvalidParameter {
                        name: "cell".into(),
                        message: format!("cell = {cell} must divide width = {}", self.strip_width()),
                    });
                }
            }
        }
        Ok(())
    }

    /// Lead blocks, reduced to transverse momentum `k` for periodic leads.
    pub fn blocks(&self, k: Option<f64>) -> Result<HamiltonianBlocks> {
        build_lead_blocks(self, k)
    }

    /// Real-space blocks of a periodic strip without the Bloch reduction:
    /// the full ring of `width` sites per layer.
    pub fn wide_strip_blocks(&self) -> Result<HamiltonianBlocks> {
        if !(self.kind == LeadKind::Preset(Preset::SquareStrip) && self.is_periodic()) {
            return Err(Error::Invalid("wide-strip blocks need a periodic square_strip".into()));
        }
        let w = self.strip_width();
        let (t, eps) = (self.param("t"), self.param("eps"));
        let mut h00 = CMatrix::from_diagonal_element(w, w, c(eps, 0.0));
        for i in 0..w {
            let j = (i + 1) % w;
            h00[(i, j)] += c(-t, 0.0);
            h00[(j, i)] += c(-t, 0.0);
        }
        let h01 = CMatrix::from_diagonal_element(w, w, c(-t, 0.0));
        HamiltonianBlocks::new(h00, h01)
    }
}

/// Expand a lead spec into principal-layer blocks.
///
/// `k` must be given exactly when the lead is transversely periodic; it is
/// folded into `[-pi, pi)`. Transverse wrapping bonds pick up `e^{±ik}`.
pub fn build_lead_blocks(spec: &LatticeSpec, k: Option<f64>) -> Result<HamiltonianBlocks> {
    spec.validate()?;
    let periodic = spec.is_periodic();
    match (periodic, k) {
        (false, Some(_)) => return Err(Error::UnexpectedMomentum),
        (true, None) => return Err(Error::MissingMomentum),
        _ => {}
    }
    let k = k.map(fold_momentum);
    let p = |name: &str| spec.param(name);
    let real = |rows: usize, data: &[f64]| CMatrix::from_row_slice(rows, rows, &data.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>());
    let (h00, h01) = match &spec.kind {
        LeadKind::Explicit { h00, h01 } => (h00.clone(), h01.clone()),
        LeadKind::Preset(Preset::Chain) => (real(1, &[p("eps")]), real(1, &[-p("t")])),
        LeadKind::Preset(Preset::DimerChain) => {
            let (e1, e2, intra, inter) = match spec.termination {
                Termination::A => (p("eps_a"), p("eps_b"), p("t1"), p("t2")),
                Termination::B => (p("eps_b"), p("eps_a"), p("t2"), p("t1")),
            };
            (
                real(2, &[e1, -intra, -intra, e2]),
                real(2, &[0.0, 0.0, -inter, 0.0]),
            )
        }
        LeadKind::Preset(Preset::Ladder) => {
            let (t, tp, eps, td) = (p("t"), p("t_perp"), p("eps"), p("t_diag"));
            (real(2, &[eps, -tp, -tp, eps]), real(2, &[-t, -td, 0.0, -t]))
        }
        LeadKind::Preset(Preset::SquareStrip) => {
            let (t, eps) = (p("t"), p("eps"));
            let n = spec.surface_dim();
            let mut h00 = CMatrix::from_diagonal_element(n, n, c(eps, 0.0));
            for i in 0..n.saturating_sub(1) {
                h00[(i, i + 1)] = c(-t, 0.0);
                h00[(i + 1, i)] = c(-t, 0.0);
            }
            if let Some(k) = k {
                // Bond from the last site of one transverse cell to the first
                // site of the next one.
                let ph = C64::from_polar(1.0, k);
                h00[(n - 1, 0)] += -t * ph;
                h00[(0, n - 1)] += -t * ph.conj();
            }
            (h00, CMatrix::from_diagonal_element(n, n, c(-t, 0.0)))
        }
    };
    let mut blocks = HamiltonianBlocks::new(h00, h01)?;
    blocks.k = k;
    Ok(blocks)
}

fn check_square(name: &str, m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            first: format!("{name} rows"),
            first_dims: m.shape(),
            second: format!("{name} columns"),
            second_dims: (m.ncols(), m.nrows()),
        });
    }
    Ok(())
}

fn check_hermitian(name: &str, m: &CMatrix) -> Result<()> {
    let (row, col, deviation) = hermiticity_defect(m);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian {
            block: name.into(),
            row,
            col,
            deviation,
        });
    }
    Ok(())
}

/// Device Hamiltonian with explicit lead couplings.
///
/// `coupling_left` (n_l x N) identifies the device orbitals facing the left
/// lead: the lead's embedding potential enters the device as
/// `coupling^H * Sigma * coupling`. Same for the right.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub h_c: CMatrix,
    pub coupling_left: CMatrix,
    pub coupling_right: CMatrix,
    pub surface_left: Vec<usize>,
    pub surface_right: Vec<usize>,
}

impl DeviceSpec {
    pub fn new(h_c: CMatrix, coupling_left: CMatrix, coupling_right: CMatrix) -> Result<Self> {
        check_square("device.h", &h_c)?;
        check_hermitian("device.h", &h_c)?;
        let n = h_c.nrows();
        for (name, cpl) in [("device.coupling_left", &coupling_left), ("device.coupling_right", &coupling_right)] {
            if cpl.ncols() != n || cpl.nrows() == 0 {
                return Err(Error::DimensionMismatch {
                    first: name.into(),
                    first_dims: cpl.shape(),
                    second: "device.h".into(),
                    second_dims: h_c.shape(),
                });
            }
        }
        let touched = |m: &CMatrix| -> Vec<usize> { (0..n).filter(|&j| m.column(j).iter().any(|z| z.norm() > 0.0)).collect() };
        let surface_left = touched(&coupling_left);
        let surface_right = touched(&coupling_right);
        let overlap = surface_left.iter().any(|i| surface_right.contains(i));
        // Shared orbitals are only allowed when both leads attach to the
        // whole device (a single shared site or layer).
        if overlap && !(surface_left.len() == n && surface_right.len() == n) {
            return Err(Error::Invalid(format!(
                "left surface sites {surface_left:?} and right surface sites {surface_right:?} overlap"
            )));
        }
        Ok(Self {
            h_c,
            coupling_left,
            coupling_right,
            surface_left,
            surface_right,
        })
    }

    pub fn size(&self) -> usize {
        self.h_c.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeviceConfig {
    Explicit {
        h: CMatrix,
        coupling_left: CMatrix,
        coupling_right: CMatrix,
    },
    /// `layers` copies of the left lead's principal layer, with `impurity`
    /// added to the on-site energy of orbital `site`. Rebuilt at every
    /// transverse momentum.
    Segment { layers: usize, impurity: f64, site: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub lead_left: LatticeSpec,
    pub lead_right: LatticeSpec,
    pub device: DeviceConfig,
}

impl Model {
    pub fn new(lead_left: LatticeSpec, lead_right: LatticeSpec, device: DeviceConfig) -> Result<Self> {
        let model = Model {
            lead_left,
            lead_right,
            device,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_model(text)
    }

    pub fn lead(&self, side: crate::embed::Side) -> &LatticeSpec {
        match side {
            crate::embed::Side::Left => &self.lead_left,
            crate::embed::Side::Right => &self.lead_right,
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.lead_left.is_periodic()
    }

    /// Transverse momenta to sample: the strip's K grid, or a single `None`.
    pub fn k_points(&self) -> Vec<Option<f64>> {
        if self.is_periodic() {
            self.lead_left.k_points().into_iter().map(Some).collect()
        } else {
            vec![None]
        }
    }

    fn validate(&self) -> Result<()> {
        self.lead_left.validate()?;
        self.lead_right.validate()?;
        if self.lead_left.is_periodic() != self.lead_right.is_periodic() {
            return Err(Error::Invalid("both leads must agree on transverse periodicity".into()));
        }
        let k = self.k_points()[0];
        self.device_at(k)?;
        Ok(())
    }

    pub fn device_at(&self, k: Option<f64>) -> Result<DeviceSpec> {
        let n_l = self.lead_left.surface_dim();
        let n_r = self.lead_right.surface_dim();
        let device = match &self.device {
            DeviceConfig::Explicit {
                h,
                coupling_left,
                coupling_right,
            } => DeviceSpec::new(h.clone(), coupling_left.clone(), coupling_right.clone())?,
            DeviceConfig::Segment { layers, impurity, site } => {
                let blocks = self.lead_left.blocks(k)?;
                let n = blocks.n();
                if n_r != n {
                    return Err(Error::DimensionMismatch {
                        first: "lead_right layer".into(),
                        first_dims: (n_r, n_r),
                        second: "device segment layer".into(),
                        second_dims: (n, n),
                    });
                }
                let size = n * layers;
                if *site >= size {
                    return Err(Error::InvalidParameter {
                        name: "site".into(),
                        message: format!("{site} outside a device of {size} orbitals"),
                    });
                }
                let mut h = CMatrix::zeros(size, size);
                for l in 0..*layers {
                    h.view_mut((l * n, l * n), (n, n)).copy_from(&blocks.h00);
                    if l + 1 < *layers {
                        h.view_mut((l * n, (l + 1) * n), (n, n)).copy_from(&blocks.h01);
                        h.view_mut(((l + 1) * n, l * n), (n, n)).copy_from(&blocks.h01.adjoint());
                    }
                }
                h[(*site, *site)] += c(*impurity, 0.0);
                let mut cl = CMatrix::zeros(n, size);
                let mut cr = CMatrix::zeros(n, size);
                for i in 0..n {
                    cl[(i, i)] = c(1.0, 0.0);
                    cr[(i, size - n + i)] = c(1.0, 0.0);
                }
                DeviceSpec::new(h, cl, cr)?
            }
        };
        if device.coupling_left.nrows() != n_l {
            return Err(Error::DimensionMismatch {
                first: "device.coupling_left".into(),
                first_dims: device.coupling_left.shape(),
                second: "lead_left layer".into(),
                second_dims: (n_l, n_l),
            });
        }
        if device.coupling_right.nrows() != n_r {
            return Err(Error::DimensionMismatch {
                first: "device.coupling_right".into(),
                first_dims: device.coupling_right.shape(),
                second: "lead_right layer".into(),
                second_dims: (n_r, n_r),
            });
        }
        Ok(device)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "lead_left": lead_to_json(&self.lead_left),
            "lead_right": lead_to_json(&self.lead_right),
            "device": device_to_json(&self.device),
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("model serializes")
    }

    /// SHA-256 of the canonical (compact, key-sorted) JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.to_json()).expect("model serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

// ---------------------------------------------------------------------------
// JSON

/// Parse and validate a model configuration document.
pub fn parse_model(text: &str) -> Result<Model> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let obj = as_object(&root, "$")?;
    check_keys(obj, "$", &["lead_left", "lead_right", "device"])?;
    let lead_left = parse_lead(required(obj, "$", "lead_left")?, "lead_left")?;
    let lead_right = parse_lead(required(obj, "$", "lead_right")?, "lead_right")?;
    let device = parse_device(required(obj, "$", "device")?, "device")?;
    Model::new(lead_left, lead_right, device)
}

fn perr(path: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        message: message.into(),
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| perr(path, "expected an object"))
}

fn required<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| perr(path, format!("missing field `{key}`")))
}

fn check_keys(obj: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<()> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(perr(&format!("{path}.{k}"), format!("unknown field (expected one of {allowed:?})"))),
        None => Ok(()),
    }
}

fn parse_params(v: Option<&Value>, path: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let Some(v) = v else { return Ok(out) };
    for (k, val) in as_object(v, path)? {
        let x = val
            .as_f64()
            .ok_or_else(|| perr(&format!("{path}.{k}"), "expected a number"))?;
        out.insert(k.clone(), x);
    }
    Ok(out)
}

fn parse_complex(v: &Value, path: &str) -> Result<C64> {
    if let Some(x) = v.as_f64() {
        return Ok(c(x, 0.0));
    }
    match v.as_array().map(|a| a.as_slice()) {
        Some([re, im]) => match (re.as_f64(), im.as_f64()) {
            (Some(re), Some(im)) => Ok(c(re, im)),
            _ => Err(perr(path, "complex entry must be [re, im] numbers")),
        },
        _ => Err(perr(path, "expected a number or an [re, im] pair")),
    }
}

fn parse_matrix(v: &Value, path: &str) -> Result<CMatrix> {
    let rows = v.as_array().ok_or_else(|| perr(path, "expected an array of rows"))?;
    if rows.is_empty() {
        return Err(perr(path, "matrix has no rows"));
    }
    let mut data = Vec::new();
    let mut ncols = None;
    for (i, row) in rows.iter().enumerate() {
        let rpath = format!("{path}[{i}]");
        let entries = row.as_array().ok_or_else(|| perr(&rpath, "expected a row array"))?;
        match ncols {
            None => ncols = Some(entries.len()),
            Some(nc) if nc != entries.len() => {
                return Err(perr(&rpath, format!("row has {} entries, expected {nc}", entries.len())))
            }
            _ => {}
        }
        for (j, e) in entries.iter().enumerate() {
            data.push(parse_complex(e, &format!("{rpath}[{j}]"))?);
        }
    }
    let ncols = ncols.unwrap_or(0);
    if ncols == 0 {
        return Err(perr(path, "matrix has no columns"));
    }
    Ok(CMatrix::from_row_slice(rows.len(), ncols, &data))
}

fn parse_lead(v: &Value, path: &str) -> Result<LatticeSpec> {
    let obj = as_object(v, path)?;
    if obj.contains_key("preset") {
        check_keys(obj, path, &["preset", "params", "transverse", "termination"])?;
        let name = obj["preset"]
            .as_str()
            .ok_or_else(|| perr(&format!("{path}.preset"), "expected a string"))?;
        let preset = Preset::from_name(name).ok_or_else(|| {
            perr(
                &format!("{path}.preset"),
                format!("unknown preset `{name}` (chain, dimer_chain, ladder, square_strip)"),
            )
        })?;
        let params = parse_params(obj.get("params"), &format!("{path}.params"))?;
        let transverse = match obj.get("transverse") {
            None => None,
            Some(t) => {
                let tpath = format!("{path}.transverse");
                let tobj = as_object(t, &tpath)?;
                check_keys(tobj, &tpath, &["width", "periodic"])?;
                let width = required(tobj, &tpath, "width")?
                    .as_u64()
                    .filter(|&w| w >= 1)
                    .ok_or_else(|| perr(&format!("{tpath}.width"), "expected a positive integer"))?;
                let periodic = match tobj.get("periodic") {
                    None => false,
                    Some(p) => p
                        .as_bool()
                        .ok_or_else(|| perr(&format!("{tpath}.periodic"), "expected a boolean"))?,
                };
                Some(Transverse {
                    width: width as usize,
                    periodic,
                })
            }
        };
        let termination = match obj.get("termination").map(|t| t.as_str()) {
            None => Termination::A,
            Some(Some("a") | Some("A")) => Termination::A,
            Some(Some("b") | Some("B")) => Termination::B,
            Some(_) => return Err(perr(&format!("{path}.termination"), "expected \"a\" or \"b\"")),
        };
        let spec = LatticeSpec {
            kind: LeadKind::Preset(preset),
            params,
            transverse,
            termination,
        };
        spec.validate().map_err(|e| qualify(e, path))?;
        Ok(spec)
    } else {
        check_keys(obj, path, &["h00", "h01"])?;
        let h00 = parse_matrix(required(obj, path, "h00")?, &format!("{path}.h00"))?;
        let h01 = parse_matrix(required(obj, path, "h01")?, &format!("{path}.h01"))?;
        LatticeSpec::explicit(h00, h01).map_err(|e| qualify(e, path))
    }
}

fn parse_device(v: &Value, path: &str) -> Result<DeviceConfig> {
    let obj = as_object(v, path)?;
    if obj.contains_key("preset") {
        check_keys(obj, path, &["preset", "params"])?;
        if obj["preset"].as_str() != Some("segment") {
            return Err(perr(&format!("{path}.preset"), "the only device preset is `segment`"));
        }
        let params = parse_params(obj.get("params"), &format!("{path}.params"))?;
        if let Some(k) = params.keys().find(|k| !["layers", "impurity", "site"].contains(&k.as_str())) {
            return Err(perr(&format!("{path}.params.{k}"), "unknown segment parameter"));
        }
        let layers = params.get("layers").copied().unwrap_or(1.0);
        let site = params.get("site").copied().unwrap_or(0.0);
        if layers < 1.0 || layers.fract() != 0.0 {
            return Err(perr(&format!("{path}.params.layers"), "must be a positive integer"));
        }
        if site < 0.0 || site.fract() != 0.0 {
            return Err(perr(&format!("{path}.params.site"), "must be a non-negative integer"));
        }
        Ok(DeviceConfig::Segment {
            layers: layers as usize,
            impurity: params.get("impurity").copied().unwrap_or(0.0),
            site: site as usize,
        })
    } else {
        check_keys(obj, path, &["h", "coupling_left", "coupling_right"])?;
        let h = parse_matrix(required(obj, path, "h")?, &format!("{path}.h"))?;
        let coupling_left = parse_matrix(required(obj, path, "coupling_left")?, &format!("{path}.coupling_left"))?;
        let coupling_right = parse_matrix(required(obj, path, "coupling_right")?, &format!("{path}.coupling_right"))?;
        DeviceSpec::new(h.clone(), coupling_left.clone(), coupling_right.clone()).map_err(|e| qualify(e, path))?;
        Ok(DeviceConfig::Explicit {
            h,
            coupling_left,
            coupling_right,
        })
    }
}

/// Prefix block names in validation errors with their location in the document.
fn qualify(err: Error, path: &str) -> Error {
    let prefix = |s: String| if s.starts_with(path) { s } else { format!("{path}.{s}") };
    match err {
        Error::NotHermitian { block, row, col, deviation } => Error::NotHermitian {
            block: prefix(block),
            row,
            col,
            deviation,
        },
        Error::DimensionMismatch {
            first,
            first_dims,
            second,
            second_dims,
        } => Error::DimensionMismatch {
            first: prefix(first),
            first_dims,
            second: prefix(second),
            second_dims,
        },
        Error::InvalidParameter { name, message } => Error::InvalidParameter {
            name: prefix(name),
            message,
        },
        other => other,
    }
}

fn matrix_to_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

fn lead_to_json(spec: &LatticeSpec) -> Value {
    match &spec.kind {
        LeadKind::Explicit { h00, h01 } => json!({ "h00": matrix_to_json(h00), "h01": matrix_to_json(h01) }),
        LeadKind::Preset(p) => {
            let mut obj = Map::new();
            obj.insert("preset".into(), json!(p.name()));
            obj.insert("params".into(), json!(spec.params));
            if let Some(t) = spec.transverse {
                obj.insert("transverse".into(), json!({ "width": t.width, "periodic": t.periodic }));
            }
            if spec.termination == Termination::B {
                obj.insert("termination".into(), json!("b"));
            }
            Value::Object(obj)
        }
    }
}

fn device_to_json(device: &DeviceConfig) -> Value {
    match device {
        DeviceConfig::Explicit {
            h,
            coupling_left,
            coupling_right,
        } => json!({
            "h": matrix_to_json(h),
            "coupling_left": matrix_to_json(coupling_left),
            "coupling_right": matrix_to_json(coupling_right),
        }),
        DeviceConfig::Segment { layers, impurity, site } => json!({
            "preset": "segment",
            "params": { "layers": layers, "impurity": impurity, "site": site },
        }),
    }
}
