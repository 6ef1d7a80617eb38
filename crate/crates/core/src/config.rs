//! Run configuration (TOML) and its translation into engine objects.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::anisotropy::Anisotropy;
use crate::curve::ClosedCurve;
use crate::elasticity::{BulkEnergyModel, DirichletData, Domain, FemModel, HookeTensor, Polynomial};
use crate::error::{Error, Result};
use crate::step::{Backend, StepConfig};
use crate::{Mat2, Vec2};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub initial_curve: InitialCurve,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub anisotropy: AnisotropySpec,
    #[serde(default)]
    pub elasticity: ElasticitySpec,
    #[serde(default)]
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub compare: Option<CompareSpec>,
    pub sweep: Option<SweepSpec>,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_n() -> usize {
    256
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCurve {
    Circle { r: f64 },
    Ellipse { a: f64, b: f64 },
    /// r(θ) = r + Σ ε cos(kθ).
    Perturbed { r: f64, modes: Vec<(f64, u32)> },
    Wulff,
    /// A curve snapshot JSON or a plain `x y` per line text file.
    Points { path: PathBuf },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnisotropySpec {
    #[serde(default)]
    pub kind: AnisotropyKind,
    pub matrix: Option<[[f64; 2]; 2]>,
    pub fourier_terms: Option<Vec<(f64, u32)>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnisotropyKind {
    #[default]
    Euclidean,
    Elliptic,
    Fourier,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElasticityKind {
    #[default]
    None,
    Analytic,
    Fem,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticitySpec {
    #[serde(default)]
    pub kind: ElasticityKind,
    /// (λ, μ).
    pub lame: Option<(f64, f64)>,
    pub omega: Option<OmegaSpec>,
    pub w0: Option<W0Spec>,
    pub mesh_size: Option<f64>,
    /// Terms (i, j, c) of q = Σ c xⁱ yʲ.
    pub analytic_q: Option<Vec<(u32, u32, f64)>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaSpec {
    Disk {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    Rectangle { min: [f64; 2], max: [f64; 2] },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum W0Spec {
    Affine {
        matrix: [[f64; 2]; 2],
        #[serde(default)]
        shift: [f64; 2],
    },
    Radial { delta: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendSpec {
    #[default]
    Minimize,
    ElFixedPoint,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(rename = "T", default = "default_t")]
    pub t_final: f64,
    #[serde(default)]
    pub backend: BackendSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn default_h() -> f64 {
    1e-3
}
fn default_beta() -> f64 {
    0.1
}
fn default_t() -> f64 {
    0.1
}
fn default_stride() -> usize {
    10
}

impl Default for SchemeSpec {
    fn default() -> Self {
        SchemeSpec {
            h: default_h(),
            beta: default_beta(),
            t_final: default_t(),
            backend: BackendSpec::default(),
            tolerances: Tolerances::default(),
            snapshot_stride: default_stride(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_tol")]
    pub optimizer: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default = "default_outer_tol")]
    pub outer: f64,
}

fn default_tol() -> f64 {
    1e-9
}
fn default_max_iter() -> usize {
    500
}
fn default_max_outer() -> usize {
    12
}
fn default_outer_tol() -> f64 {
    1e-10
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            optimizer: default_tol(),
            max_iter: default_max_iter(),
            max_outer: default_max_outer(),
            outer: default_outer_tol(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    /// Defaults to 0.5·(L/n)²/max g on the initial curve.
    pub dt: Option<f64>,
    /// Defaults to `scheme.T`.
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub a: PathBuf,
    pub b: PathBuf,
}

/// Parameter sweep: the Cartesian product of the listed values, one run
/// (and one output subdirectory) per combination.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub h: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{field} must be positive and finite (got {v})")))
    }
}

fn field_error(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Config(format!("{field}: {e}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Scalar checks that need no geometry.
    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::Config(format!("n must be at least 8 (got {})", self.n)));
        }
        match &self.initial_curve {
            InitialCurve::Circle { r } => positive("initial_curve.r", *r)?,
            InitialCurve::Ellipse { a, b } => {
                positive("initial_curve.a", *a)?;
                positive("initial_curve.b", *b)?;
            }
            InitialCurve::Perturbed { r, modes } => {
                positive("initial_curve.r", *r)?;
                let total: f64 = modes.iter().map(|(e, _)| e.abs()).sum();
                if !(total < *r) {
                    return Err(Error::Config("initial_curve.modes: amplitudes must sum below r".into()));
                }
            }
            InitialCurve::Wulff | InitialCurve::Points { .. } => {}
        }
        let s = &self.scheme;
        positive("scheme.h", s.h)?;
        positive("scheme.beta", s.beta)?;
        if !(s.t_final >= 0.0) {
            return Err(Error::Config(format!("scheme.T must be non-negative (got {})", s.t_final)));
        }
        positive("scheme.tolerances.optimizer", s.tolerances.optimizer)?;
        positive("scheme.tolerances.outer", s.tolerances.outer)?;
        if s.tolerances.max_iter == 0 {
            return Err(Error::Config("scheme.tolerances.max_iter must be positive".into()));
        }
        if s.snapshot_stride == 0 {
            return Err(Error::Config("scheme.snapshot_stride must be positive".into()));
        }
        if let Some(dt) = self.reference.dt {
            positive("reference.dt", dt)?;
        }
        if let Some(t) = self.reference.t_final {
            if !(t >= 0.0) {
                return Err(Error::Config(format!("reference.T must be non-negative (got {t})")));
            }
        }
        if let Some(sw) = &self.sweep {
            for &h in &sw.h {
                positive("sweep.h", h)?;
            }
            for &b in &sw.beta {
                positive("sweep.beta", b)?;
            }
        }
        self.anisotropy()?;
        self.bulk_model()?;
        Ok(())
    }

    pub fn anisotropy(&self) -> Result<Anisotropy> {
        let a = &self.anisotropy;
        match a.kind {
            AnisotropyKind::Euclidean => Ok(Anisotropy::Euclidean),
            AnisotropyKind::Elliptic => {
                let m = a.matrix.ok_or_else(|| Error::Config("anisotropy.matrix is required for elliptic".into()))?;
                Anisotropy::elliptic(Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1]))
                    .map_err(field_error("anisotropy.matrix"))
            }
            AnisotropyKind::Fourier => {
                let t = a
                    .fourier_terms
                    .clone()
                    .ok_or_else(|| Error::Config("anisotropy.fourier_terms is required for fourier".into()))?;
                Anisotropy::fourier(t).map_err(field_error("anisotropy.fourier_terms"))
            }
        }
    }

    fn omega(&self) -> Result<Domain> {
        let d = match self.elasticity.omega.as_ref() {
            Some(OmegaSpec::Disk { center, radius }) => {
                Domain::Disk { center: Vec2::new(center[0], center[1]), radius: *radius }
            }
            Some(OmegaSpec::Rectangle { min, max }) => {
                Domain::Rectangle { min: Vec2::new(min[0], min[1]), max: Vec2::new(max[0], max[1]) }
            }
            None => return Err(Error::Config("elasticity.omega is required".into())),
        };
        d.validate().map_err(field_error("elasticity.omega"))?;
        Ok(d)
    }

    pub fn bulk_model(&self) -> Result<BulkEnergyModel> {
        let el = &self.elasticity;
        match el.kind {
            ElasticityKind::None => Ok(BulkEnergyModel::None),
            ElasticityKind::Analytic => {
                let q = el
                    .analytic_q
                    .clone()
                    .ok_or_else(|| Error::Config("elasticity.analytic_q is required for analytic".into()))?;
                Ok(BulkEnergyModel::Analytic { q: Polynomial::new(q), omega: self.omega()? })
            }
            ElasticityKind::Fem => {
                let (lambda, mu) = el.lame.ok_or_else(|| Error::Config("elasticity.lame is required for fem".into()))?;
                let tensor = HookeTensor::isotropic(lambda, mu).map_err(field_error("elasticity.lame"))?;
                let omega = self.omega()?;
                let w0 = match el.w0.as_ref() {
                    Some(W0Spec::Affine { matrix: m, shift }) => DirichletData::Affine {
                        matrix: Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1]),
                        shift: Vec2::new(shift[0], shift[1]),
                    },
                    Some(W0Spec::Radial { delta }) => DirichletData::Radial { delta: *delta, center: omega.center() },
                    None => return Err(Error::Config("elasticity.w0 is required for fem".into())),
                };
                let mesh_size = el.mesh_size.unwrap_or(0.05);
                positive("elasticity.mesh_size", mesh_size)?;
                Ok(BulkEnergyModel::Fem(FemModel { tensor, omega, w0, mesh_size }))
            }
        }
    }

    pub fn initial_curve(&self) -> Result<ClosedCurve> {
        let n = self.n;
        let curve = match &self.initial_curve {
            InitialCurve::Circle { r } => ClosedCurve::circle(*r, n),
            InitialCurve::Ellipse { a, b } => ClosedCurve::ellipse(*a, *b, n),
            InitialCurve::Perturbed { r, modes } => {
                ClosedCurve::polar(|t| r + modes.iter().map(|(e, k)| e * (*k as f64 * t).cos()).sum::<f64>(), n)
            }
            InitialCurve::Wulff => self.anisotropy()?.wulff_boundary(n),
            InitialCurve::Points { path } => {
                let path = self.base_dir.join(path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("initial_curve.path {}: {e}", path.display())))?;
                read_points(&text).and_then(|p| ClosedCurve::from_points(&p, n))
            }
        };
        curve.map_err(field_error("initial_curve"))
    }

    pub fn step_config(&self) -> Result<StepConfig> {
        let s = &self.scheme;
        let mut cfg = StepConfig::new(s.h, s.beta, self.anisotropy()?)
            .with_bulk(self.bulk_model()?)
            .with_backend(match s.backend {
                BackendSpec::Minimize => Backend::Minimize,
                BackendSpec::ElFixedPoint => Backend::ElFixedPoint,
            });
        cfg.tol = s.tolerances.optimizer;
        cfg.max_iter = s.tolerances.max_iter;
        cfg.max_outer = s.tolerances.max_outer;
        cfg.outer_tol = s.tolerances.outer;
        Ok(cfg)
    }

    /// Output directory: explicit override, then `output_dir`, then `out`.
    pub fn output_dir(&self, overridden: Option<&Path>) -> PathBuf {
        match (overridden, &self.output_dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(p)) => self.base_dir.join(p),
            (None, None) => self.base_dir.join("out"),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    /// (h, β) pairs of the sweep, or the single configured pair.
    pub fn sweep_points(&self) -> Vec<(f64, f64)> {
        let s = &self.scheme;
        let sw = self.sweep.clone().unwrap_or_default();
        let hs = if sw.h.is_empty() { vec![s.h] } else { sw.h };
        let betas = if sw.beta.is_empty() { vec![s.beta] } else { sw.beta };
        hs.iter().flat_map(|&h| betas.iter().map(move |&b| (h, b))).collect()
    }
}

/// Parses either a snapshot JSON object or whitespace-separated `x y` rows.
pub fn read_points(text: &str) -> Result<Vec<Vec2>> {
    if text.trim_start().starts_with('{') {
        return ClosedCurve::from_json(text).map(|c| c.nodes().to_vec());
    }
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let v: Vec<f64> = l
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("bad point row {l:?}: {e}")))?;
            match v[..] {
                [x, y] => Ok(Vec2::new(x, y)),
                _ => Err(Error::Config(format!("point row {l:?} needs two numbers"))),
            }
        })
        .collect()
}
