//! Radar/waveform/array configuration, target descriptions and the
//! key-value configuration file format shared by every subcommand.

use std::f64::consts::PI;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propagation speed in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Waveform, sampling and virtual-array parameters of an FMCW MIMO radar.
///
/// The chirp rate and sampling period are derived from the sweep time so
/// they can never disagree with the stored fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RadarConfigFile", into = "RadarConfigFile")]
pub struct RadarConfig {
    carrier: f64,
    bandwidth: f64,
    sweep_time: f64,
    samples: usize,
    tx: usize,
    rx: usize,
    spacing: f64,
    speed: f64,
}

/// On-disk field names of [`RadarConfig`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RadarConfigFile {
    f_c: f64,
    #[serde(rename = "B")]
    b: f64,
    sweep_time: f64,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "P")]
    p: usize,
    #[serde(rename = "Q")]
    q: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
}

impl TryFrom<RadarConfigFile> for RadarConfig {
    type Error = Error;

    fn try_from(f: RadarConfigFile) -> Result<Self> {
        let mut cfg = RadarConfig::new(f.f_c, f.b, f.sweep_time, f.n, f.p, f.q)?;
        if let Some(c) = f.c {
            cfg = cfg.with_propagation_speed(c)?;
        }
        if let Some(d) = f.d {
            cfg = cfg.with_spacing(d)?;
        }
        Ok(cfg)
    }
}

impl From<RadarConfig> for RadarConfigFile {
    fn from(c: RadarConfig) -> Self {
        RadarConfigFile {
            f_c: c.carrier,
            b: c.bandwidth,
            sweep_time: c.sweep_time,
            n: c.samples,
            p: c.tx,
            q: c.rx,
            d: Some(c.spacing),
            c: Some(c.speed),
        }
    }
}

impl RadarConfig {
    /// Creates a configuration with half-wavelength element spacing.
    pub fn new(
        carrier: f64,
        bandwidth: f64,
        sweep_time: f64,
        samples: usize,
        tx: usize,
        rx: usize,
    ) -> Result<Self> {
        let cfg = RadarConfig {
            carrier,
            bandwidth,
            sweep_time,
            samples,
            tx,
            rx,
            spacing: SPEED_OF_LIGHT / carrier / 2.0,
            speed: SPEED_OF_LIGHT,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 77 GHz carrier, 4 GHz sweep over 100 us, 256 samples, 4x4 MIMO.
    pub fn automotive_77ghz() -> Self {
        RadarConfig::new(77e9, 4e9, 1e-4, 256, 4, 4).expect("valid reference configuration")
    }

    /// Replaces the element spacing (metres).
    pub fn with_spacing(mut self, spacing: f64) -> Result<Self> {
        self.spacing = spacing;
        self.validate()?;
        Ok(self)
    }

    /// Replaces the propagation speed. Half-wavelength spacing is kept in
    /// step with the new wavelength.
    pub fn with_propagation_speed(mut self, speed: f64) -> Result<Self> {
        let half_wave = self.spacing == self.wavelength() / 2.0;
        self.speed = speed;
        if half_wave {
            self.spacing = self.wavelength() / 2.0;
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [
            ("f_c", self.carrier),
            ("B", self.bandwidth),
            ("sweep_time", self.sweep_time),
            ("d", self.spacing),
            ("c", self.speed),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return bad(format!("{name} must be finite and positive, got {v}"));
            }
        }
        if self.carrier <= self.bandwidth {
            return bad(format!(
                "carrier f_c = {} must exceed bandwidth B = {}",
                self.carrier, self.bandwidth
            ));
        }
        if self.tx == 0 || self.rx == 0 {
            return bad("P and Q must be positive".into());
        }
        if self.samples <= self.virtual_elements() {
            return bad(format!(
                "N = {} must exceed the virtual array size M = {}",
                self.samples,
                self.virtual_elements()
            ));
        }
        Ok(())
    }

    pub fn carrier(&self) -> f64 {
        self.carrier
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn sweep_time(&self) -> f64 {
        self.sweep_time
    }

    /// Samples per sweep, N.
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn tx(&self) -> usize {
        self.tx
    }

    pub fn rx(&self) -> usize {
        self.rx
    }

    /// Virtual array size M = P·Q.
    pub fn virtual_elements(&self) -> usize {
        self.tx * self.rx
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn propagation_speed(&self) -> f64 {
        self.speed
    }

    pub fn wavelength(&self) -> f64 {
        self.speed / self.carrier
    }

    pub fn sample_period(&self) -> f64 {
        self.sweep_time / self.samples as f64
    }

    /// γ = B / (N·T_s).
    pub fn chirp_rate(&self) -> f64 {
        self.bandwidth / (self.samples as f64 * self.sample_period())
    }

    /// Native range bin width c / (2B).
    pub fn range_bin(&self) -> f64 {
        self.speed / (2.0 * self.bandwidth)
    }

    /// Largest range whose beat frequency stays inside the principal interval.
    pub fn unambiguous_range(&self) -> f64 {
        self.samples as f64 * self.range_bin()
    }

    /// B / (c·N): converts path length (2r + m·u) into cycles per sample.
    pub fn beat_scale(&self) -> f64 {
        self.bandwidth / (self.speed * self.samples as f64)
    }

    /// Range-frequency index x = 2Br/c.
    pub fn range_to_index(&self, range: f64) -> f64 {
        range / self.range_bin()
    }

    pub fn index_to_range(&self, x: f64) -> f64 {
        x * self.range_bin()
    }

    /// Angle-frequency index y = M·u/λ for a signed path difference u.
    pub fn path_to_index(&self, u: f64) -> f64 {
        self.virtual_elements() as f64 * u / self.wavelength()
    }

    pub fn index_to_path(&self, y: f64) -> f64 {
        y * self.wavelength() / self.virtual_elements() as f64
    }

    /// Maps a signed angle index back to an incidence angle, clamping to
    /// the visible region.
    pub fn index_to_angle(&self, y: f64) -> f64 {
        (self.index_to_path(y) / self.spacing).clamp(-1.0, 1.0).asin()
    }

    /// Unwraps an angle index from [0, M) to [-M/2, M/2).
    pub fn signed_angle_index(&self, y: f64) -> f64 {
        let m = self.virtual_elements() as f64;
        let y = y.rem_euclid(m);
        if y >= m / 2.0 {
            y - m
        } else {
            y
        }
    }

    /// Noise level giving the requested SNR = P·a²/σ² (dB).
    pub fn sigma_for_snr(&self, amplitude: f64, snr_db: f64) -> f64 {
        (self.tx as f64 * amplitude * amplitude / 10f64.powf(snr_db / 10.0)).sqrt()
    }

    pub fn snr_db(&self, amplitude: f64, sigma: f64) -> f64 {
        10.0 * (self.tx as f64 * amplitude * amplitude / (sigma * sigma)).log10()
    }
}

/// A point scatterer seen by the array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Target {
    /// Reflectivity magnitude.
    pub a: f64,
    /// Reflectivity phase, rad.
    pub phi: f64,
    /// Range from the array origin, m.
    pub r: f64,
    /// Incidence angle from broadside, rad.
    pub theta: f64,
}

#[derive(Deserialize)]
struct TargetFile {
    #[serde(default = "one")]
    a: f64,
    #[serde(default)]
    phi: f64,
    r: f64,
    theta: Option<f64>,
    theta_deg: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let f = TargetFile::deserialize(de)?;
        let theta = match (f.theta, f.theta_deg) {
            (Some(t), None) => t,
            (None, Some(t)) => t.to_radians(),
            _ => {
                return Err(serde::de::Error::custom(
                    "target needs exactly one of `theta` (rad) or `theta_deg`",
                ))
            }
        };
        Ok(Target {
            a: f.a,
            phi: f.phi,
            r: f.r,
            theta,
        })
    }
}

impl Target {
    pub fn new(a: f64, phi: f64, r: f64, theta: f64) -> Self {
        Target { a, phi, r, theta }
    }

    /// Unit-amplitude, zero-phase target at `r` metres and `theta_deg` degrees.
    pub fn at(r: f64, theta_deg: f64) -> Self {
        Target::new(1.0, 0.0, r, theta_deg.to_radians())
    }

    /// Path-length difference between adjacent elements, u = d·sinθ.
    pub fn path_difference(&self, config: &RadarConfig) -> f64 {
        config.spacing() * self.theta.sin()
    }

    /// Lumped phase ψ = φ − πγτ²[0] + 4π f_c r / c, wrapped to (−π, π].
    pub fn lumped_phase(&self, config: &RadarConfig) -> f64 {
        let tau0 = 2.0 * self.r / config.propagation_speed();
        // 4π f_c r / c = 2π · (2r/λ); reduce in cycles to keep precision.
        let carrier_cycles = (2.0 * self.r / config.wavelength()).fract();
        wrap_phase(
            self.phi - PI * config.chirp_rate() * tau0 * tau0 + 2.0 * PI * carrier_cycles,
        )
    }

    pub fn validate(&self, config: &RadarConfig) -> Result<()> {
        if ![self.a, self.phi, self.r, self.theta]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidTarget(format!("non-finite parameter in {self:?}")));
        }
        if self.a < 0.0 {
            return Err(Error::InvalidTarget(format!("negative amplitude {}", self.a)));
        }
        if self.theta.abs() >= PI / 2.0 {
            return Err(Error::InvalidTarget(format!(
                "incidence angle {} rad outside (-pi/2, pi/2)",
                self.theta
            )));
        }
        let max = config.unambiguous_range();
        if self.r <= 0.0 || self.r >= max {
            return Err(Error::BeyondUnambiguousRange { range: self.r, max });
        }
        Ok(())
    }
}

/// Wraps a phase to (−π, π].
pub fn wrap_phase(p: f64) -> f64 {
    let w = (p + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Parses a TOML document into `T`, applying `key.path=value` overrides
/// first. Every key that `T` does not consume is reported at once.
pub fn parse_document<T: DeserializeOwned>(text: &str, overrides: &[String]) -> Result<T> {
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    for ov in overrides {
        apply_override(&mut doc, ov)?;
    }
    let mut unknown = Vec::new();
    let value = toml::Value::Table(doc);
    let parsed: T = serde_ignored::deserialize(value, |path| unknown.push(path.to_string()))
        .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    if !unknown.is_empty() {
        return Err(Error::UnknownKeys(unknown));
    }
    Ok(parsed)
}

/// Reads and parses a configuration file (see [`parse_document`]).
pub fn load_document<T: DeserializeOwned>(path: &Path, overrides: &[String]) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_document(&text, overrides)
}

fn apply_override(doc: &mut toml::Table, ov: &str) -> Result<()> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("override `{ov}` is not key=value")))?;
    let value = parse_override_value(raw.trim());
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Parse(format!("override `{ov}` has an empty key")))?;
    let mut table = doc;
    for part in parts {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Parse(format!("override `{ov}`: `{part}` is not a table"))),
        };
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    let probe = format!("v = {raw}");
    match probe.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities_are_consistent() {
        let c = RadarConfig::automotive_77ghz();
        assert_eq!(c.virtual_elements(), 16);
        assert!((c.chirp_rate() - 4e9 / 1e-4).abs() < 1.0);
        assert!((c.wavelength() - SPEED_OF_LIGHT / 77e9).abs() < 1e-18);
        assert!((c.spacing() - c.wavelength() / 2.0).abs() < 1e-18);
        assert!((c.range_bin() - 0.037474057).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RadarConfig::new(1e9, 4e9, 1e-4, 256, 4, 4).is_err());
        assert!(RadarConfig::new(77e9, 4e9, 1e-4, 16, 4, 4).is_err());
        assert!(RadarConfig::new(77e9, -1.0, 1e-4, 256, 4, 4).is_err());
        assert!(RadarConfig::new(77e9, 4e9, 1e-4, 256, 0, 4).is_err());
    }

    #[test]
    fn snr_definition_uses_transmit_count() {
        let c = RadarConfig::automotive_77ghz();
        // a = 1, P = 4, σ² = 0.4 -> 10 dB
        assert!((c.snr_db(1.0, 0.4f64.sqrt()) - 10.0).abs() < 1e-12);
        assert!((c.sigma_for_snr(1.0, 10.0) - 0.4f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn angle_index_wraps_to_negative_angles() {
        let c = RadarConfig::automotive_77ghz();
        let y = c.signed_angle_index(13.929);
        assert!((y + 2.071).abs() < 1e-12);
        assert!((c.index_to_angle(y).to_degrees() + 15.0).abs() < 0.01);
    }

    #[test]
    fn reference_bin_indices() {
        let c = RadarConfig::automotive_77ghz()
            .with_propagation_speed(3e8)
            .unwrap();
        let t = Target::at(5.0, 15.0);
        assert!((c.range_to_index(t.r) - 133.333).abs() < 1e-3);
        assert!((c.path_to_index(t.path_difference(&c)) - 2.071).abs() < 1e-3);
    }

    #[test]
    fn unambiguous_range_guard() {
        let c = RadarConfig::automotive_77ghz();
        assert!(Target::at(5.0, 10.0).validate(&c).is_ok());
        assert!(matches!(
            Target::at(10.0, 0.0).validate(&c),
            Err(Error::BeyondUnambiguousRange { .. })
        ));
        assert!(Target::at(f64::NAN, 0.0).validate(&c).is_err());
        assert!(Target::new(1.0, 0.0, 3.0, PI / 2.0).validate(&c).is_err());
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    #[derive(Deserialize, Debug)]
    struct Doc {
        radar: RadarConfig,
        #[serde(default)]
        target: Vec<Target>,
    }

    #[test]
    fn parses_document_with_overrides() {
        let text = r#"
            [radar]
            f_c = 77e9
            B = 4e9
            sweep_time = 1e-4
            N = 256
            P = 4
            Q = 4

            [[target]]
            r = 5.0
            theta_deg = 15.0
        "#;
        let doc: Doc = parse_document(text, &["radar.N=128".into()]).unwrap();
        assert_eq!(doc.radar.samples(), 128);
        assert_eq!(doc.target.len(), 1);
        assert!((doc.target[0].theta.to_degrees() - 15.0).abs() < 1e-12);
        assert_eq!(doc.target[0].a, 1.0);
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let text = r#"
            typo = 1
            [radar]
            f_c = 77e9
            B = 4e9
            sweep_time = 1e-4
            N = 256
            P = 4
            Q = 4
            bandwith = 3
        "#;
        match parse_document::<Doc>(text, &[]) {
            Err(Error::UnknownKeys(keys)) => {
                assert_eq!(keys.len(), 2, "{keys:?}");
                assert!(keys.iter().any(|k| k.contains("bandwith")));
                assert!(keys.iter().any(|k| k.contains("typo")));
            }
            other => panic!("expected unknown keys, got {other:?}"),
        }
    }
}
