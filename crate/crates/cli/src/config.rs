//! Plain key=value run configuration.
//!
//! One `key = value` pair per line, `#` comments; unknown keys are rejected
//! so manifests stay trivially diffable against the schema below.

use nalgebra::Vector3;
use onsager::energy::BoundaryProfile;
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

const ALLOWED_KEYS: &[&str] = &[
    "command",
    "out_dir",
    "alpha",
    "eps",
    "eps_list",
    "sigma",
    "theta",
    "tol_q",
    "tol_el",
    "max_iter",
    "restarts",
    "lattice_n",
    "lattice_r",
    "dim",
    "omega_half",
    "sphere_polar",
    "sphere_azimuth",
    "boundary_profile",
    "seed",
    "kernel_a",
    "eta_min",
    "eta_max",
    "eta_steps",
];

/// Parsed and defaulted run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Option<String>,
    pub out_dir: String,
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
    pub sigma: f64,
    pub theta: f64,
    pub tol_q: f64,
    pub tol_el: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub lattice_n: usize,
    pub lattice_r: f64,
    pub dim: usize,
    pub omega_half: f64,
    pub sphere_polar: usize,
    pub sphere_azimuth: usize,
    pub boundary_profile: BoundaryProfile,
    pub boundary_profile_text: String,
    pub seed: u64,
    pub kernel_a: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_steps: usize,
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !ALLOWED_KEYS.contains(&key.as_str()) {
            return Err(ConfigError(format!("unknown key `{key}`")));
        }
        if pairs.insert(key.clone(), value).is_some() {
            return Err(ConfigError(format!("duplicate key `{key}`")));
        }
    }
    Ok(pairs)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| ConfigError(format!("key `{key}`: cannot parse `{value}`")))
}

fn parse_profile(text: &str) -> Result<BoundaryProfile> {
    let (kind, rest) = text
        .split_once(':')
        .ok_or_else(|| ConfigError(format!("boundary_profile `{text}`: expected kind:params")))?;
    let parts: Vec<f64> = rest
        .split(',')
        .map(|p| parse_value("boundary_profile", p.trim()))
        .collect::<Result<Vec<_>>>()?;
    match kind.trim() {
        "constant" => {
            if parts.len() != 3 {
                return Err(ConfigError(
                    "boundary_profile constant needs 3 components".into(),
                ));
            }
            let v = Vector3::new(parts[0], parts[1], parts[2]);
            if (v.norm() - 1.0).abs() > 1e-10 {
                return Err(ConfigError(format!(
                    "boundary_profile constant direction has norm {}",
                    v.norm()
                )));
            }
            Ok(BoundaryProfile::Constant(v))
        }
        "inplane" => {
            if parts.len() != 3 && parts.len() != 4 {
                return Err(ConfigError(
                    "boundary_profile inplane needs psi0,gx,gy[,bilinear]".into(),
                ));
            }
            Ok(BoundaryProfile::InPlane {
                psi0: parts[0],
                grad: [parts[1], parts[2]],
                bilinear: if parts.len() == 4 { parts[3] } else { 0.0 },
            })
        }
        other => Err(ConfigError(format!(
            "boundary_profile kind `{other}` not one of constant, inplane"
        ))),
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<RunConfig> {
        let pairs = parse_pairs(text)?;
        let get = |key: &str| pairs.get(key).map(|s| s.as_str());

        let profile_text = get("boundary_profile").unwrap_or("constant:0,0,1").to_string();
        let config = RunConfig {
            command: get("command").map(|s| s.to_string()),
            out_dir: get("out_dir").unwrap_or("out").to_string(),
            alpha: get("alpha").map(|v| parse_value("alpha", v)).transpose()?,
            eps: get("eps").map(|v| parse_value("eps", v)).transpose()?,
            eps_list: get("eps_list")
                .map(|v| {
                    v.split(',')
                        .map(|p| parse_value::<f64>("eps_list", p.trim()))
                        .collect::<Result<Vec<_>>>()
                })
                .transpose()?,
            sigma: get("sigma").map(|v| parse_value("sigma", v)).transpose()?.unwrap_or(0.25),
            theta: get("theta").map(|v| parse_value("theta", v)).transpose()?.unwrap_or(0.5),
            tol_q: get("tol_q").map(|v| parse_value("tol_q", v)).transpose()?.unwrap_or(1e-8),
            tol_el: get("tol_el").map(|v| parse_value("tol_el", v)).transpose()?.unwrap_or(1e-6),
            max_iter: get("max_iter")
                .map(|v| parse_value("max_iter", v))
                .transpose()?
                .unwrap_or(500),
            restarts: get("restarts")
                .map(|v| parse_value("restarts", v))
                .transpose()?
                .unwrap_or(4),
            lattice_n: get("lattice_n")
                .map(|v| parse_value("lattice_n", v))
                .transpose()?
                .unwrap_or(64),
            lattice_r: get("lattice_r")
                .map(|v| parse_value("lattice_r", v))
                .transpose()?
                .unwrap_or(3.0),
            dim: get("dim").map(|v| parse_value("dim", v)).transpose()?.unwrap_or(2),
            omega_half: get("omega_half")
                .map(|v| parse_value("omega_half", v))
                .transpose()?
                .unwrap_or(0.5),
            sphere_polar: get("sphere_polar")
                .map(|v| parse_value("sphere_polar", v))
                .transpose()?
                .unwrap_or(24),
            sphere_azimuth: get("sphere_azimuth")
                .map(|v| parse_value("sphere_azimuth", v))
                .transpose()?
                .unwrap_or(48),
            boundary_profile: parse_profile(&profile_text)?,
            boundary_profile_text: profile_text,
            seed: get("seed").map(|v| parse_value("seed", v)).transpose()?.unwrap_or(0),
            kernel_a: get("kernel_a")
                .map(|v| parse_value("kernel_a", v))
                .transpose()?
                .unwrap_or(std::f64::consts::FRAC_PI_2),
            eta_min: get("eta_min")
                .map(|v| parse_value("eta_min", v))
                .transpose()?
                .unwrap_or(0.0),
            eta_max: get("eta_max")
                .map(|v| parse_value("eta_max", v))
                .transpose()?
                .unwrap_or(20.0),
            eta_steps: get("eta_steps")
                .map(|v| parse_value("eta_steps", v))
                .transpose()?
                .unwrap_or(400),
        };

        if !(config.kernel_a > 0.0 && config.kernel_a < std::f64::consts::PI) {
            return Err(ConfigError(format!(
                "kernel_a = {} not in (0, pi)",
                config.kernel_a
            )));
        }
        if !(config.sigma > 0.0 && config.sigma < 0.5) {
            return Err(ConfigError(format!(
                "sigma = {} not in (0, 1/2)",
                config.sigma
            )));
        }
        Ok(config)
    }

    pub fn require_alpha(&self) -> Result<f64> {
        self.alpha
            .ok_or_else(|| ConfigError("missing required key `alpha`".into()))
    }

    pub fn require_eps(&self) -> Result<f64> {
        self.eps
            .ok_or_else(|| ConfigError("missing required key `eps`".into()))
    }

    pub fn require_eps_list(&self) -> Result<Vec<f64>> {
        self.eps_list
            .clone()
            .ok_or_else(|| ConfigError("missing required key `eps_list`".into()))
    }

    /// Resolved configuration echo for the manifest, fixed field order.
    pub fn manifest(&self, command: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command = {command}");
        let _ = writeln!(s, "out_dir = {}", self.out_dir);
        if let Some(alpha) = self.alpha {
            let _ = writeln!(s, "alpha = {alpha}");
        }
        if let Some(eps) = self.eps {
            let _ = writeln!(s, "eps = {eps}");
        }
        if let Some(list) = &self.eps_list {
            let joined: Vec<String> = list.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "eps_list = {}", joined.join(","));
        }
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "theta = {}", self.theta);
        let _ = writeln!(s, "tol_q = {}", self.tol_q);
        let _ = writeln!(s, "tol_el = {}", self.tol_el);
        let _ = writeln!(s, "max_iter = {}", self.max_iter);
        let _ = writeln!(s, "restarts = {}", self.restarts);
        let _ = writeln!(s, "lattice_n = {}", self.lattice_n);
        let _ = writeln!(s, "lattice_r = {}", self.lattice_r);
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "omega_half = {}", self.omega_half);
        let _ = writeln!(s, "sphere_polar = {}", self.sphere_polar);
        let _ = writeln!(s, "sphere_azimuth = {}", self.sphere_azimuth);
        let _ = writeln!(s, "boundary_profile = {}", self.boundary_profile_text);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "kernel_a = {}", self.kernel_a);
        let _ = writeln!(s, "eta_min = {}", self.eta_min);
        let _ = writeln!(s, "eta_max = {}", self.eta_max);
        let _ = writeln!(s, "eta_steps = {}", self.eta_steps);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let config = RunConfig::from_text("alpha = 8.0\n# comment\n\neps = 0.004\n").unwrap();
        assert_eq!(config.alpha, Some(8.0));
        assert_eq!(config.eps, Some(0.004));
        assert_eq!(config.lattice_n, 64);
        assert_eq!(config.sigma, 0.25);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(RunConfig::from_text("frobnicate = 1\n").is_err());
        assert!(RunConfig::from_text("alpha = 8\nalpha = 9\n").is_err());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(RunConfig::from_text("kernel_a = 4.0\n").is_err());
        assert!(RunConfig::from_text("sigma = 0.7\n").is_err());
    }

    #[test]
    fn parses_profiles_and_lists() {
        let config = RunConfig::from_text(
            "boundary_profile = inplane:0.1,1.5,0,0.3\neps_list = 1.6e-2, 4e-3, 1e-3\n",
        )
        .unwrap();
        assert!(matches!(
            config.boundary_profile,
            BoundaryProfile::InPlane { .. }
        ));
        assert_eq!(config.eps_list.unwrap().len(), 3);
        assert!(RunConfig::from_text("boundary_profile = constant:1,1,1\n").is_err());
    }
}
