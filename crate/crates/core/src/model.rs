//! Uncertain linear systems, constraint sets, cost weights and the finite
//! horizon robust OCP description.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{check_psd, is_finite, matrix_from_rows, matrix_to_rows, spectral_radius};
use crate::polytope::{HPolytope, PolytopeJson, SupportFunction};

/// Known nominal dynamics `x⁺ = Â x + B̂ u`.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalSystem {
    a_hat: DMatrix<f64>,
    b_hat: DMatrix<f64>,
}

impl NominalSystem {
    pub fn new(a_hat: DMatrix<f64>, b_hat: DMatrix<f64>) -> Result<Self> {
        if !a_hat.is_square() || a_hat.nrows() == 0 {
            return Err(Error::Validation("Â must be square and nonempty".into()));
        }
        if b_hat.nrows() != a_hat.nrows() || b_hat.ncols() == 0 {
            return Err(Error::Validation(format!(
                "B̂ must have {} rows and at least one column",
                a_hat.nrows()
            )));
        }
        if !is_finite(&a_hat) || !is_finite(&b_hat) {
            return Err(Error::Validation("nominal dynamics must be finite".into()));
        }
        Ok(Self { a_hat, b_hat })
    }

    pub fn a_hat(&self) -> &DMatrix<f64> {
        &self.a_hat
    }

    pub fn b_hat(&self) -> &DMatrix<f64> {
        &self.b_hat
    }

    pub fn n_x(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b_hat.ncols()
    }
}

/// One vertex `(ΔA_j, ΔB_j)` of the model-uncertainty polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyVertex {
    pub delta_a: DMatrix<f64>,
    pub delta_b: DMatrix<f64>,
}

/// `(ΔA, ΔB) ∈ conv{(ΔA_j, ΔB_j)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopicUncertainty {
    vertices: Vec<UncertaintyVertex>,
    /// Separate ΔA / ΔB hulls when the vertex set came from their product.
    hulls: Option<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)>,
}

impl PolytopicUncertainty {
    pub fn from_vertices(vertices: Vec<UncertaintyVertex>) -> Result<Self> {
        let first = vertices
            .first()
            .ok_or_else(|| Error::Validation("uncertainty needs at least one vertex".into()))?;
        let (sa, sb) = (first.delta_a.shape(), first.delta_b.shape());
        for v in &vertices {
            if v.delta_a.shape() != sa || v.delta_b.shape() != sb {
                return Err(Error::DimensionMismatch("uncertainty vertex shapes differ".into()));
            }
            if !is_finite(&v.delta_a) || !is_finite(&v.delta_b) {
                return Err(Error::Validation("uncertainty vertices must be finite".into()));
            }
        }
        Ok(Self {
            vertices,
            hulls: None,
        })
    }

    /// No model uncertainty.
    pub fn none(n_x: usize, n_u: usize) -> Self {
        product_vertices(&[DMatrix::zeros(n_x, n_x)], &[DMatrix::zeros(n_x, n_u)])
            .expect("zero hulls are consistent")
    }

    pub fn vertices(&self) -> &[UncertaintyVertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn hulls(&self) -> Option<(&[DMatrix<f64>], &[DMatrix<f64>])> {
        self.hulls.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()))
    }
}

/// Joint vertex set of separately listed ΔA and ΔB hulls (their Cartesian
/// product, ΔA-major order).
pub fn product_vertices(
    delta_a_hull: &[DMatrix<f64>],
    delta_b_hull: &[DMatrix<f64>],
) -> Result<PolytopicUncertainty> {
    if delta_a_hull.is_empty() || delta_b_hull.is_empty() {
        return Err(Error::Validation("uncertainty hulls must be nonempty".into()));
    }
    let n_x = delta_a_hull[0].nrows();
    for da in delta_a_hull {
        if da.shape() != (n_x, n_x) {
            return Err(Error::DimensionMismatch("ΔA vertices must be n_x × n_x".into()));
        }
    }
    let n_u = delta_b_hull[0].ncols();
    for db in delta_b_hull {
        if db.shape() != (n_x, n_u) {
            return Err(Error::DimensionMismatch("ΔB vertices must be n_x × n_u".into()));
        }
    }
    let vertices = delta_a_hull
        .iter()
        .flat_map(|da| {
            delta_b_hull.iter().map(move |db| UncertaintyVertex {
                delta_a: da.clone(),
                delta_b: db.clone(),
            })
        })
        .collect();
    let mut u = PolytopicUncertainty::from_vertices(vertices)?;
    u.hulls = Some((delta_a_hull.to_vec(), delta_b_hull.to_vec()));
    Ok(u)
}

/// `‖w‖∞ <= sigma_w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceBound(f64);

impl DisturbanceBound {
    pub fn new(sigma_w: f64) -> Result<Self> {
        if !(sigma_w >= 0.0) || !sigma_w.is_finite() {
            return Err(Error::Validation(format!("sigma_w must be finite and >= 0, got {sigma_w}")));
        }
        Ok(Self(sigma_w))
    }

    pub fn sigma_w(self) -> f64 {
        self.0
    }

    /// Closed-form support of the ∞-ball: `σ_w ‖f‖₁`.
    pub fn support(self, f: &DVector<f64>) -> f64 {
        self.0 * f.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn as_polytope(self, n_x: usize) -> HPolytope {
        HPolytope::inf_ball(n_x, self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    q_t: DMatrix<f64>,
}

impl CostWeights {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, q_t: DMatrix<f64>) -> Result<Self> {
        check_psd("Q", &q, false)?;
        check_psd("R", &r, true)?;
        check_psd("Q_T", &q_t, false)?;
        if q.shape() != q_t.shape() {
            return Err(Error::DimensionMismatch("Q and Q_T must have equal shape".into()));
        }
        Ok(Self { q, r, q_t })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn q_t(&self) -> &DMatrix<f64> {
        &self.q_t
    }
}

/// Structure of the disturbance filter Σ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Sub-diagonal filter blocks are free decision variables.
    #[serde(alias = "full")]
    FullBlockLowerTriangular,
    /// Sub-diagonal filter blocks are fixed to zero.
    #[serde(alias = "diagonal")]
    DiagonalOnly,
}

/// Finite-horizon robust OCP data.
#[derive(Debug, Clone)]
pub struct OcpSpec {
    system: NominalSystem,
    uncertainty: PolytopicUncertainty,
    disturbance: DisturbanceBound,
    x_set: HPolytope,
    u_set: HPolytope,
    terminal_set: HPolytope,
    weights: CostWeights,
    horizon: usize,
    filter_mode: FilterMode,
}

impl OcpSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        system: NominalSystem,
        uncertainty: PolytopicUncertainty,
        disturbance: DisturbanceBound,
        x_set: HPolytope,
        u_set: HPolytope,
        terminal_set: Option<HPolytope>,
        weights: CostWeights,
        horizon: usize,
        filter_mode: FilterMode,
    ) -> Result<Self> {
        let terminal_set = terminal_set.unwrap_or_else(|| x_set.clone());
        let spec = Self {
            system,
            uncertainty,
            disturbance,
            x_set,
            u_set,
            terminal_set,
            weights,
            horizon,
            filter_mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let (n_x, n_u) = (self.n_x(), self.n_u());
        if self.horizon == 0 {
            return Err(Error::Validation("horizon must be at least 1".into()));
        }
        for v in self.uncertainty.vertices() {
            if v.delta_a.shape() != (n_x, n_x) || v.delta_b.shape() != (n_x, n_u) {
                return Err(Error::DimensionMismatch(
                    "uncertainty vertices do not match the nominal system".into(),
                ));
            }
        }
        if self.weights.q.nrows() != n_x || self.weights.r.nrows() != n_u {
            return Err(Error::DimensionMismatch("cost weights do not match the system".into()));
        }
        for (name, set, dim) in [
            ("state set", &self.x_set, n_x),
            ("input set", &self.u_set, n_u),
            ("terminal set", &self.terminal_set, n_x),
        ] {
            if set.dim() != dim {
                return Err(Error::DimensionMismatch(format!("{name} has dimension {}", set.dim())));
            }
            if !set.contains_origin_strictly() {
                return Err(Error::Validation(format!(
                    "{name} must contain the origin in its interior"
                )));
            }
            for i in 0..dim {
                for s in [1.0, -1.0] {
                    let mut e = DVector::zeros(dim);
                    e[i] = s;
                    match set.support(&e) {
                        Ok(v) if v.is_finite() => {}
                        Ok(_) | Err(Error::Unbounded) => {
                            return Err(Error::Validation(format!("{name} must be bounded")))
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        Ok(())
    }

    pub fn system(&self) -> &NominalSystem {
        &self.system
    }

    pub fn a_hat(&self) -> &DMatrix<f64> {
        self.system.a_hat()
    }

    pub fn b_hat(&self) -> &DMatrix<f64> {
        self.system.b_hat()
    }

    pub fn n_x(&self) -> usize {
        self.system.n_x()
    }

    pub fn n_u(&self) -> usize {
        self.system.n_u()
    }

    pub fn uncertainty(&self) -> &PolytopicUncertainty {
        &self.uncertainty
    }

    pub fn disturbance(&self) -> DisturbanceBound {
        self.disturbance
    }

    pub fn sigma_w(&self) -> f64 {
        self.disturbance.sigma_w()
    }

    pub fn x_set(&self) -> &HPolytope {
        &self.x_set
    }

    pub fn u_set(&self) -> &HPolytope {
        &self.u_set
    }

    pub fn terminal_set(&self) -> &HPolytope {
        &self.terminal_set
    }

    pub fn weights(&self) -> &CostWeights {
        &self.weights
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn filter_mode(&self) -> FilterMode {
        self.filter_mode
    }

    pub fn with_terminal_set(&self, terminal_set: HPolytope) -> Result<Self> {
        let mut s = self.clone();
        s.terminal_set = terminal_set;
        s.validate()?;
        Ok(s)
    }

    pub fn with_filter_mode(&self, filter_mode: FilterMode) -> Self {
        let mut s = self.clone();
        s.filter_mode = filter_mode;
        s
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        let mut s = self.clone();
        s.horizon = horizon;
        s.validate()?;
        Ok(s)
    }

    /// Serializable form following the JSON spec schema. Requires the
    /// uncertainty to have been built from separate ΔA/ΔB hulls.
    pub fn to_file(&self) -> Result<SpecFile> {
        let (da, db) = self.uncertainty.hulls().ok_or_else(|| {
            Error::Unsupported("joint vertex lists have no hull-form JSON encoding".into())
        })?;
        Ok(SpecFile {
            a_hat: matrix_to_rows(self.a_hat()),
            b_hat: matrix_to_rows(self.b_hat()),
            delta_a_vertices: da.iter().map(matrix_to_rows).collect(),
            delta_b_vertices: db.iter().map(matrix_to_rows).collect(),
            sigma_w: self.sigma_w(),
            x_set: self.x_set.to_json(),
            u_set: self.u_set.to_json(),
            terminal_set: Some(self.terminal_set.to_json()),
            q: matrix_to_rows(self.weights.q()),
            r: matrix_to_rows(self.weights.r()),
            q_t: matrix_to_rows(self.weights.q_t()),
            horizon: self.horizon,
            filter_mode: self.filter_mode,
        })
    }

    /// SHA-256 over a canonical dump of every field (joint vertex list
    /// included), hex encoded.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            a_hat: Vec<Vec<f64>>,
            b_hat: Vec<Vec<f64>>,
            vertices: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
            sigma_w: f64,
            x_set: PolytopeJson,
            u_set: PolytopeJson,
            terminal_set: PolytopeJson,
            q: Vec<Vec<f64>>,
            r: Vec<Vec<f64>>,
            q_t: Vec<Vec<f64>>,
            horizon: usize,
            filter_mode: &'a FilterMode,
        }
        let c = Canonical {
            a_hat: matrix_to_rows(self.a_hat()),
            b_hat: matrix_to_rows(self.b_hat()),
            vertices: self
                .uncertainty
                .vertices()
                .iter()
                .map(|v| (matrix_to_rows(&v.delta_a), matrix_to_rows(&v.delta_b)))
                .collect(),
            sigma_w: self.sigma_w(),
            x_set: self.x_set.to_json(),
            u_set: self.u_set.to_json(),
            terminal_set: self.terminal_set.to_json(),
            q: matrix_to_rows(self.weights.q()),
            r: matrix_to_rows(self.weights.r()),
            q_t: matrix_to_rows(self.weights.q_t()),
            horizon: self.horizon,
            filter_mode: &self.filter_mode,
        };
        let bytes = serde_json::to_vec(&c).expect("spec serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// JSON spec schema. Matrices are row-major arrays of arrays; a `null`
/// terminal set means "use the state set".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecFile {
    pub a_hat: Vec<Vec<f64>>,
    pub b_hat: Vec<Vec<f64>>,
    pub delta_a_vertices: Vec<Vec<Vec<f64>>>,
    pub delta_b_vertices: Vec<Vec<Vec<f64>>>,
    pub sigma_w: f64,
    pub x_set: PolytopeJson,
    pub u_set: PolytopeJson,
    #[serde(default)]
    pub terminal_set: Option<PolytopeJson>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub q_t: Vec<Vec<f64>>,
    pub horizon: usize,
    pub filter_mode: FilterMode,
}

impl SpecFile {
    pub fn into_spec(self) -> Result<OcpSpec> {
        let system = NominalSystem::new(
            matrix_from_rows("a_hat", &self.a_hat)?,
            matrix_from_rows("b_hat", &self.b_hat)?,
        )?;
        let da = self
            .delta_a_vertices
            .iter()
            .map(|m| matrix_from_rows("delta_a_vertices", m))
            .collect::<Result<Vec<_>>>()?;
        let db = self
            .delta_b_vertices
            .iter()
            .map(|m| matrix_from_rows("delta_b_vertices", m))
            .collect::<Result<Vec<_>>>()?;
        let terminal = self.terminal_set.as_ref().map(HPolytope::from_json).transpose()?;
        OcpSpec::new(
            system,
            product_vertices(&da, &db)?,
            DisturbanceBound::new(self.sigma_w)?,
            HPolytope::from_json(&self.x_set)?,
            HPolytope::from_json(&self.u_set)?,
            terminal,
            CostWeights::new(
                matrix_from_rows("q", &self.q)?,
                matrix_from_rows("r", &self.r)?,
                matrix_from_rows("q_t", &self.q_t)?,
            )?,
            self.horizon,
            self.filter_mode,
        )
    }
}

pub fn load_spec(path: &Path) -> Result<OcpSpec> {
    let text = std::fs::read_to_string(path)?;
    let file: SpecFile = serde_json::from_str(&text)?;
    file.into_spec()
}

/// ΔA hull `{±ε_A e₁e₁ᵀ}` and ΔB hull `{±ε_B e₂}` used by the benchmark
/// experiments.
fn benchmark_hulls(eps_a: f64, eps_b: f64) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let da = |s: f64| DMatrix::from_row_slice(2, 2, &[s * eps_a, 0.0, 0.0, 0.0]);
    let db = |s: f64| DMatrix::from_row_slice(2, 1, &[0.0, s * eps_b]);
    (vec![da(1.0), da(-1.0)], vec![db(1.0), db(-1.0)])
}

fn benchmark_spec(
    a_hat: DMatrix<f64>,
    b_hat: DMatrix<f64>,
    eps_a: f64,
    eps_b: f64,
    sigma_w: f64,
) -> Result<OcpSpec> {
    let (da, db) = benchmark_hulls(eps_a, eps_b);
    OcpSpec::new(
        NominalSystem::new(a_hat, b_hat)?,
        product_vertices(&da, &db)?,
        DisturbanceBound::new(sigma_w)?,
        HPolytope::from_box(&[-8.0, -8.0], &[8.0, 8.0])?,
        HPolytope::from_box(&[-4.0], &[4.0])?,
        None,
        CostWeights::new(
            DMatrix::identity(2, 2) * 10.0,
            DMatrix::identity(1, 1),
            DMatrix::identity(2, 2) * 10.0,
        )?,
        10,
        FilterMode::FullBlockLowerTriangular,
    )
}

/// The two-state benchmark: `Â = [[1, 0.15], [0.1, 1]]`, `B̂ = [0.1; 1.1]`,
/// `|x_i| <= 8`, `|u| <= 4`, `Q = Q_T = 10 I`, `R = 1`, `T = 10`.
///
/// The terminal set is the state set; experiments replace it with the
/// maximal robust control invariant set.
pub fn paper_benchmark(eps_a: f64, eps_b: f64, sigma_w: f64) -> Result<OcpSpec> {
    benchmark_spec(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.15, 0.1, 1.0]),
        DMatrix::from_row_slice(2, 1, &[0.1, 1.1]),
        eps_a,
        eps_b,
        sigma_w,
    )
}

/// Output of [`random_system`].
#[derive(Debug, Clone)]
pub struct RandomSystem {
    pub seed: u64,
    pub spec: OcpSpec,
    /// Spectral radius of Â after rescaling.
    pub spectral_radius: f64,
    /// Number of Â draws discarded because their spectral radius vanished.
    pub resamples: usize,
}

/// Random two-state, one-input instance: Â entries `U[-2, 2]` rescaled to a
/// spectral radius drawn from `U[0.5, 2.5]`, B̂ entries `U[-1, 1]`,
/// `ε_A = 0.2`, `ε_B = 0.1`, `σ_w = 0.1`, no terminal constraint beyond the
/// state set, `T = 10`.
pub fn random_system(seed: u64) -> Result<RandomSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut resamples = 0;
    let (a_raw, rho_raw) = loop {
        let a = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-2.0..=2.0));
        let rho = spectral_radius(&a);
        if rho >= 1e-8 {
            break (a, rho);
        }
        resamples += 1;
    };
    let target = rng.gen_range(0.5..=2.5);
    let a_hat = a_raw * (target / rho_raw);
    let b_hat = DMatrix::from_fn(2, 1, |_, _| rng.gen_range(-1.0..=1.0));
    let spec = benchmark_spec(a_hat, b_hat, 0.2, 0.1, 0.1)?;
    let spectral_radius = spectral_radius(spec.a_hat());
    Ok(RandomSystem {
        seed,
        spec,
        spectral_radius,
        resamples,
    })
}
