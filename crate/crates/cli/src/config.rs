//! Flat `key = value` run configuration.
//!
//! Lines starting with `#` are comments. Lists are comma separated. Every key has
//! a default, so an empty file describes the standard steel/aluminium experiment.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;

use elastic_cloak::analysis::{CloakFamily, Direction, Discretization};
use elastic_cloak::materials::IsotropicMaterial;
use elastic_cloak::mesh::Shape;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Key path such as `line 3: inclusion_lambda`.
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    None,
    Disk,
    Ellipse,
    Rectangle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub outer_radius: f64,
    pub shape: ShapeKind,
    /// Disk radius, ellipse semi-axis or rectangle side along x₁ (m).
    pub a: f64,
    /// `None`: `1/a` for ellipses and `π/a` for rectangles (area π), ignored for disks.
    pub b: Option<f64>,
    pub background: IsotropicMaterial,
    pub inclusion: IsotropicMaterial,
    pub family: CloakFamily,
    pub epsilon: f64,
    pub epsilon_list: Vec<f64>,
    pub layers_n: usize,
    pub layers_list: Vec<usize>,
    pub cloak_length: f64,
    pub traction: f64,
    /// Inclusion scaling for `solve`.
    pub eta: f64,
    pub eta_list: Vec<f64>,
    pub direction: Direction,
    pub radii: Vec<f64>,
    pub contrast_lambda: f64,
    pub contrast_mu: f64,
    pub omega: f64,
    pub rho_background: f64,
    pub rho_inclusion: f64,
    pub h: f64,
    pub h_inclusion: Option<f64>,
    pub h_cloak: Option<f64>,
    pub order: usize,
    /// `0` disables the refinement check.
    pub refine_factor: f64,
    pub convergence_levels: usize,
    pub profile_samples: usize,
    pub seed: u64,
    pub threads: usize,
    pub out: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let steel = IsotropicMaterial::steel();
        RunConfig {
            outer_radius: 10.0,
            shape: ShapeKind::Ellipse,
            a: 1.0,
            b: None,
            background: steel,
            inclusion: IsotropicMaterial::aluminium(),
            family: CloakFamily::Cosserat,
            epsilon: 0.2,
            epsilon_list: vec![0.4, 0.3, 0.2, 0.1],
            layers_n: 20,
            layers_list: vec![10, 20, 40],
            cloak_length: 2.0,
            traction: 1e9,
            eta: 1.0,
            eta_list: vec![1e-2, 1e-3, 1e-4, 1e-5],
            direction: Direction::Soft,
            radii: vec![1.0, 1e-1, 1e-2],
            contrast_lambda: 1e2,
            contrast_mu: 1e2,
            omega: 0.0,
            rho_background: 7850.0,
            rho_inclusion: 2700.0,
            h: 0.3,
            h_inclusion: None,
            h_cloak: Some(0.1),
            order: 2,
            refine_factor: 0.0,
            convergence_levels: 3,
            profile_samples: 101,
            seed: 0,
            threads: 0,
            out: "out".into(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "outer_radius",
    "shape",
    "a",
    "b",
    "background_lambda",
    "background_mu",
    "inclusion_lambda",
    "inclusion_mu",
    "family",
    "epsilon",
    "epsilon_list",
    "layers_n",
    "layers_list",
    "cloak_length",
    "traction",
    "eta",
    "eta_list",
    "direction",
    "radii",
    "contrast_lambda",
    "contrast_mu",
    "omega",
    "rho_background",
    "rho_inclusion",
    "h",
    "h_inclusion",
    "h_cloak",
    "order",
    "refine_factor",
    "convergence_levels",
    "profile_samples",
    "seed",
    "threads",
    "out",
];

fn num(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v
        .parse()
        .map_err(|_| err(key, format!("expected a number, got {v:?}")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(err(key, "value must be finite"))
    }
}

fn int(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse()
        .map_err(|_| err(key, format!("expected a nonnegative integer, got {v:?}")))
}

fn list<T>(key: &str, v: &str, f: impl Fn(&str, &str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(key, s))
        .collect()
}

fn opt(key: &str, v: &str) -> Result<Option<f64>, ConfigError> {
    if v == "auto" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn join<T: std::fmt::Debug>(v: &[T]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_else(|| "auto".into())
}

pub fn parse_family(key: &str, v: &str, layers: usize) -> Result<CloakFamily, ConfigError> {
    match v {
        "cosserat" => Ok(CloakFamily::Cosserat),
        "symmetrized" => Ok(CloakFamily::Symmetrized),
        "layered" => Ok(CloakFamily::Layered(layers)),
        "willis" => Ok(CloakFamily::Willis),
        _ => Err(err(key, format!("unknown cloak family {v:?} (cosserat, symmetrized, layered, willis)"))),
    }
}

fn family_name(f: CloakFamily) -> &'static str {
    match f {
        CloakFamily::Cosserat => "cosserat",
        CloakFamily::Symmetrized => "symmetrized",
        CloakFamily::Layered(_) => "layered",
        CloakFamily::Willis => "willis",
    }
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let v = v.trim();
        match key {
            "outer_radius" => self.outer_radius = num(key, v)?,
            "shape" => {
                self.shape = match v {
                    "none" => ShapeKind::None,
                    "disk" => ShapeKind::Disk,
                    "ellipse" => ShapeKind::Ellipse,
                    "rectangle" => ShapeKind::Rectangle,
                    _ => return Err(err(key, format!("unknown shape {v:?} (none, disk, ellipse, rectangle)"))),
                }
            }
            "a" => self.a = num(key, v)?,
            "b" => self.b = opt(key, v)?,
            "background_lambda" => self.background.lambda = num(key, v)?,
            "background_mu" => self.background.mu = num(key, v)?,
            "inclusion_lambda" => self.inclusion.lambda = num(key, v)?,
            "inclusion_mu" => self.inclusion.mu = num(key, v)?,
            "family" => self.family = parse_family(key, v, self.layers_n)?,
            "epsilon" => self.epsilon = num(key, v)?,
            "epsilon_list" => self.epsilon_list = list(key, v, num)?,
            "layers_n" => {
                self.layers_n = int(key, v)?;
                if let CloakFamily::Layered(_) = self.family {
                    self.family = CloakFamily::Layered(self.layers_n);
                }
            }
            "layers_list" => self.layers_list = list(key, v, int)?,
            "cloak_length" => self.cloak_length = num(key, v)?,
            "traction" => self.traction = num(key, v)?,
            "eta" => self.eta = num(key, v)?,
            "eta_list" => self.eta_list = list(key, v, num)?,
            "direction" => {
                self.direction = match v {
                    "soft" => Direction::Soft,
                    "hard" => Direction::Hard,
                    _ => return Err(err(key, format!("unknown direction {v:?} (soft, hard)"))),
                }
            }
            "radii" => self.radii = list(key, v, num)?,
            "contrast_lambda" => self.contrast_lambda = num(key, v)?,
            "contrast_mu" => self.contrast_mu = num(key, v)?,
            "omega" => self.omega = num(key, v)?,
            "rho_background" => self.rho_background = num(key, v)?,
            "rho_inclusion" => self.rho_inclusion = num(key, v)?,
            "h" => self.h = num(key, v)?,
            "h_inclusion" => self.h_inclusion = opt(key, v)?,
            "h_cloak" => self.h_cloak = opt(key, v)?,
            "order" => self.order = int(key, v)?,
            "refine_factor" => self.refine_factor = num(key, v)?,
            "convergence_levels" => self.convergence_levels = int(key, v)?,
            "profile_samples" => self.profile_samples = int(key, v)?,
            "seed" => self.seed = v.parse().map_err(|_| err(key, format!("expected an integer, got {v:?}")))?,
            "threads" => self.threads = int(key, v)?,
            "out" => {
                if v.is_empty() {
                    return Err(err(key, "output directory must be nonempty"));
                }
                self.out = v.to_string()
            }
            _ => return Err(err(key, "unknown key")),
        }
        Ok(())
    }

    /// Parses configuration text over the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("line {}", i + 1), "expected key = value"))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(err(format!("line {}: {k}", i + 1), "duplicate key"));
            }
            cfg.set(k, v).map_err(|e| err(format!("line {}: {}", i + 1, e.key), e.message))?;
        }
        // `family = layered` may precede `layers_n`.
        if let CloakFamily::Layered(_) = cfg.family {
            cfg.family = CloakFamily::Layered(cfg.layers_n);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key, one per line, in [`KEYS`] order.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let shape = match self.shape {
            ShapeKind::None => "none",
            ShapeKind::Disk => "disk",
            ShapeKind::Ellipse => "ellipse",
            ShapeKind::Rectangle => "rectangle",
        };
        let dir = match self.direction {
            Direction::Soft => "soft",
            Direction::Hard => "hard",
        };
        for key in KEYS {
            let v = match *key {
                "outer_radius" => format!("{:?}", self.outer_radius),
                "shape" => shape.into(),
                "a" => format!("{:?}", self.a),
                "b" => fmt_opt(self.b),
                "background_lambda" => format!("{:?}", self.background.lambda),
                "background_mu" => format!("{:?}", self.background.mu),
                "inclusion_lambda" => format!("{:?}", self.inclusion.lambda),
                "inclusion_mu" => format!("{:?}", self.inclusion.mu),
                "family" => family_name(self.family).into(),
                "epsilon" => format!("{:?}", self.epsilon),
                "epsilon_list" => join(&self.epsilon_list),
                "layers_n" => self.layers_n.to_string(),
                "layers_list" => join(&self.layers_list),
                "cloak_length" => format!("{:?}", self.cloak_length),
                "traction" => format!("{:?}", self.traction),
                "eta" => format!("{:?}", self.eta),
                "eta_list" => join(&self.eta_list),
                "direction" => dir.into(),
                "radii" => join(&self.radii),
                "contrast_lambda" => format!("{:?}", self.contrast_lambda),
                "contrast_mu" => format!("{:?}", self.contrast_mu),
                "omega" => format!("{:?}", self.omega),
                "rho_background" => format!("{:?}", self.rho_background),
                "rho_inclusion" => format!("{:?}", self.rho_inclusion),
                "h" => format!("{:?}", self.h),
                "h_inclusion" => fmt_opt(self.h_inclusion),
                "h_cloak" => fmt_opt(self.h_cloak),
                "order" => self.order.to_string(),
                "refine_factor" => format!("{:?}", self.refine_factor),
                "convergence_levels" => self.convergence_levels.to_string(),
                "profile_samples" => self.profile_samples.to_string(),
                "seed" => self.seed.to_string(),
                "threads" => self.threads.to_string(),
                "out" => self.out.clone(),
                _ => unreachable!("key table out of sync"),
            };
            let _ = writeln!(s, "{key} = {v}");
        }
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(err(key, format!("must be positive, got {v}")))
            }
        };
        positive("outer_radius", self.outer_radius)?;
        positive("h", self.h)?;
        positive("a", self.a)?;
        positive("cloak_length", self.cloak_length)?;
        positive("eta", self.eta)?;
        positive("contrast_lambda", self.contrast_lambda)?;
        positive("contrast_mu", self.contrast_mu)?;
        positive("rho_background", self.rho_background)?;
        positive("rho_inclusion", self.rho_inclusion)?;
        for (k, v) in [("b", self.b), ("h_inclusion", self.h_inclusion), ("h_cloak", self.h_cloak)] {
            if let Some(v) = v {
                positive(k, v)?;
            }
        }
        if self.omega < 0.0 {
            return Err(err("omega", "must be >= 0"));
        }
        if !(0.0 < self.epsilon && self.epsilon < 1.0) {
            return Err(err("epsilon", "must lie in (0, 1)"));
        }
        if self.order != 1 && self.order != 2 {
            return Err(err("order", "must be 1 or 2"));
        }
        if self.refine_factor != 0.0 && self.refine_factor <= 1.0 {
            return Err(err("refine_factor", "must be 0 (off) or greater than 1"));
        }
        for (k, m) in [("background", &self.background), ("inclusion", &self.inclusion)] {
            m.check(2)
                .map_err(|e| err(format!("{k}_lambda/{k}_mu"), e.to_string()))?;
        }
        let nonempty = |k: &str, n: usize| {
            if n > 0 {
                Ok(())
            } else {
                Err(err(k, "list must be nonempty"))
            }
        };
        nonempty("epsilon_list", self.epsilon_list.len())?;
        nonempty("eta_list", self.eta_list.len())?;
        nonempty("radii", self.radii.len())?;
        nonempty("layers_list", self.layers_list.len())?;
        for &e in &self.epsilon_list {
            if !(0.0 < e && e < 1.0) {
                return Err(err("epsilon_list", format!("{e} not in (0, 1)")));
            }
        }
        for (k, v) in [("eta_list", &self.eta_list), ("radii", &self.radii)] {
            if v.iter().any(|x| x.is_nan() || *x <= 0.0) {
                return Err(err(k, "entries must be positive"));
            }
        }
        for &n in self.layers_list.iter().chain(std::iter::once(&self.layers_n)) {
            if n < 2 || n % 2 != 0 {
                return Err(err("layers_n/layers_list", format!("layer count {n} must be even and >= 2")));
            }
        }
        if self.convergence_levels < 3 {
            return Err(err("convergence_levels", "need at least 3 levels"));
        }
        if self.profile_samples < 2 {
            return Err(err("profile_samples", "need at least 2 samples"));
        }
        Ok(())
    }

    /// Inclusion shape with the area-π defaults for the second length.
    pub fn inclusion_shape(&self) -> Option<Shape> {
        match self.shape {
            ShapeKind::None => None,
            ShapeKind::Disk => Some(Shape::Disk { r: self.a }),
            ShapeKind::Ellipse => Some(Shape::Ellipse {
                a: self.a,
                b: self.b.unwrap_or(1.0 / self.a),
            }),
            ShapeKind::Rectangle => Some(Shape::Rectangle {
                a: self.a,
                b: self.b.unwrap_or(PI / self.a),
            }),
        }
    }

    pub fn discretization(&self) -> Discretization {
        Discretization {
            h: self.h,
            h_inclusion: self.h_inclusion,
            h_cloak: self.h_cloak,
            order: self.order,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::parse("# only a comment\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn serialization_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("shape", "rectangle").unwrap();
        cfg.set("a", "2.5").unwrap();
        cfg.set("eta_list", "1e-2, 1e-3").unwrap();
        cfg.set("h_inclusion", "0.05").unwrap();
        cfg.set("family", "layered").unwrap();
        cfg.set("layers_n", "14").unwrap();
        let text = cfg.serialize();
        assert_eq!(text.lines().count(), KEYS.len());
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn layer_count_may_follow_the_family() {
        let cfg = RunConfig::parse("family = layered\nlayers_n = 8").unwrap();
        assert_eq!(cfg.family, CloakFamily::Layered(8));
    }

    #[test]
    fn second_length_defaults_keep_area_pi() {
        let mut cfg = RunConfig {
            a: 4.0,
            ..Default::default()
        };
        assert_eq!(cfg.inclusion_shape(), Some(Shape::Ellipse { a: 4.0, b: 0.25 }));
        cfg.shape = ShapeKind::Rectangle;
        assert!((cfg.inclusion_shape().unwrap().area() - PI).abs() < 1e-15);
        cfg.b = Some(3.0);
        assert_eq!(cfg.inclusion_shape(), Some(Shape::Rectangle { a: 4.0, b: 3.0 }));
        cfg.shape = ShapeKind::None;
        assert_eq!(cfg.inclusion_shape(), None);
    }

    #[test]
    fn invalid_values_name_their_key() {
        // λ may be negative, but not below −μ in two dimensions
        let (steel, alu) = (IsotropicMaterial::steel(), IsotropicMaterial::aluminium());
        assert!(RunConfig::parse(&format!("inclusion_lambda = {}", -0.5 * alu.mu)).is_ok());
        let e = RunConfig::parse(&format!("background_lambda = {}", -2.0 * steel.mu)).unwrap_err();
        assert!(e.key.contains("background"), "{e}");

        let cases = [
            ("h = 0", "h"),
            ("epsilon = 1", "epsilon"),
            ("order = 3", "order"),
            ("eta_list = 1e-2, -1", "eta_list"),
            ("layers_list = 10, 15", "layers_n/layers_list"),
            ("refine_factor = 0.5", "refine_factor"),
            ("omega = -1", "omega"),
        ];
        for (text, key) in cases {
            assert_eq!(RunConfig::parse(text).unwrap_err().key, key, "{text}");
        }
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        assert_eq!(RunConfig::parse("h = 0.2\nnonsense").unwrap_err().key, "line 2");
        assert_eq!(RunConfig::parse("h = 0.2\nh = 0.3").unwrap_err().key, "line 2: h");
        assert_eq!(RunConfig::parse("colour = blue").unwrap_err().key, "line 1: colour");
        assert_eq!(RunConfig::parse("h = fast").unwrap_err().key, "line 1: h");
        assert_eq!(RunConfig::parse("h = inf").unwrap_err().key, "line 1: h");
        assert!(RunConfig::parse("shape = hexagon").is_err());
    }
}
