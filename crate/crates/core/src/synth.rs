//! Synthetic benchmark generator: fields, feature mapping, fixture files and a
//! run configuration with a known yield-generating function.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::acquire::fixture_path;
use crate::error::{Error, Result};
use crate::family::{Derivation, Family};
use crate::schema::{write_feature_mapping, write_fields, FeatureSpec, FieldRecord};
use crate::series::format_f64;

/// Columns carrying the yield signal, one per family.
pub const PLANTED_SIGNALS: [&str; 5] = ["RH2M", "LAI", "RVI", "soil_carbon", "slope"];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub fields: usize,
    pub seed: u64,
    pub window_days: u32,
    pub start: NaiveDate,
    /// Probability that a single observation is blank.
    pub cell_missing: f64,
    /// Probability that a whole fixture file is absent.
    pub file_missing: f64,
    /// Share of total yield variance explained by the generating function.
    pub target_r2: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            fields: 600,
            seed: 2024,
            window_days: 30,
            start: NaiveDate::from_ymd_opt(2022, 6, 1).expect("valid date"),
            cell_missing: 0.05,
            file_missing: 0.01,
            target_r2: 0.75,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSummary {
    pub root: PathBuf,
    pub config_path: PathBuf,
    pub noise_sd: f64,
    /// R² of the noiseless generating function against the noisy yields.
    pub oracle_r2: f64,
    pub fixture_files: usize,
    pub missing_files: usize,
}

/// How one variable's fixture series is laid out in time.
#[derive(Clone, Copy)]
enum Cadence {
    Static,
    Every(u32),
}

struct Variable {
    key: &'static str,
    source: &'static str,
    platform: &'static str,
    family: Family,
    units: &'static str,
    cadence: Cadence,
    /// Daily noise around the field level.
    jitter: f64,
}

const fn var(
    key: &'static str,
    source: &'static str,
    platform: &'static str,
    family: Family,
    units: &'static str,
    cadence: Cadence,
    jitter: f64,
) -> Variable {
    Variable { key, source, platform, family, units, cadence, jitter }
}

const POWER: (&str, &str) = ("NASA POWER", "NASA_POWER");
const ERA5: (&str, &str) = ("ERA5-Land", "ECMWF/ERA5_LAND/DAILY_AGGR");
const S2: (&str, &str) = ("Sentinel-2", "COPERNICUS/S2_SR_HARMONIZED");
const MODIS: (&str, &str) = ("MODIS LAI", "MODIS/061/MCD15A3H");
const S1: (&str, &str) = ("Sentinel-1", "COPERNICUS/S1_GRD");
const SOILGRIDS: (&str, &str) = ("SoilGrids", "projects/soilgrids-isric");
const SRTM: (&str, &str) = ("SRTM", "USGS/SRTMGL1_003");

fn variables() -> Vec<Variable> {
    use Cadence::*;
    use Family::*;
    vec![
        var("T2M", POWER.0, POWER.1, Meteorology, "C", Every(1), 1.2),
        var("T2M_MAX", POWER.0, POWER.1, Meteorology, "C", Every(1), 1.5),
        var("T2M_MIN", POWER.0, POWER.1, Meteorology, "C", Every(1), 1.5),
        var("RH2M", POWER.0, POWER.1, Meteorology, "%", Every(1), 3.0),
        var("ALLSKY_SFC_SW_DWN", POWER.0, POWER.1, Meteorology, "MJ/m^2/day", Every(1), 2.0),
        var("PEV", ERA5.0, ERA5.1, Meteorology, "mm", Every(1), 0.8),
        var("TP", ERA5.0, ERA5.1, Meteorology, "mm", Every(1), 2.5),
        var("NDVI", S2.0, S2.1, Vegetation, "", Every(5), 0.04),
        var("NIR", S2.0, S2.1, Vegetation, "", Every(5), 0.02),
        var("RED", S2.0, S2.1, Vegetation, "", Every(5), 0.01),
        var("BLUE", S2.0, S2.1, Vegetation, "", Every(5), 0.005),
        var("LAI", MODIS.0, MODIS.1, Vegetation, "m^2/m^2", Every(4), 0.1),
        var("VV", S1.0, S1.1, Sar, "dB", Every(6), 0.8),
        var("VH", S1.0, S1.1, Sar, "dB", Every(6), 0.8),
        var("RVI", S1.0, S1.1, Sar, "", Every(6), 0.02),
        var("soil_carbon", SOILGRIDS.0, SOILGRIDS.1, Soil, "g/kg", Static, 0.0),
        var("soc_stock", SOILGRIDS.0, SOILGRIDS.1, Soil, "t/ha", Static, 0.0),
        var("clay", SOILGRIDS.0, SOILGRIDS.1, Soil, "%", Static, 0.0),
        var("bulk_density", SOILGRIDS.0, SOILGRIDS.1, Soil, "g/cm^3", Static, 0.0),
        var("elevation", SRTM.0, SRTM.1, Topography, "m", Static, 0.0),
        var("slope", SRTM.0, SRTM.1, Topography, "deg", Static, 0.0),
        var("aspect", SRTM.0, SRTM.1, Topography, "deg", Static, 0.0),
    ]
}

/// Mapping rows: every fetched variable except the raw bands and PEV/TP, which
/// only feed the EVI and irrigation derivations.
fn mapping(vars: &[Variable]) -> Vec<FeatureSpec> {
    let mut specs: Vec<FeatureSpec> = vars
        .iter()
        .filter(|v| !matches!(v.key, "NIR" | "RED" | "BLUE" | "PEV" | "TP"))
        .map(|v| FeatureSpec {
            key_variable: v.key.into(),
            api_parameter: v.key.into(),
            source_dataset: v.source.into(),
            platform: v.platform.into(),
            notes: String::new(),
            derivation: Derivation::None,
            family: v.family,
        })
        .collect();
    specs.push(FeatureSpec {
        key_variable: "EVI".into(),
        api_parameter: "Derived".into(),
        source_dataset: S2.0.into(),
        platform: S2.1.into(),
        notes: "EVI = 2.5(NIR-RED)/(NIR+6RED-7.5BLUE+1)".into(),
        derivation: Derivation::Evi,
        family: Family::Vegetation,
    });
    specs.push(FeatureSpec {
        key_variable: "IRRIGATION".into(),
        api_parameter: "Derived".into(),
        source_dataset: ERA5.0.into(),
        platform: ERA5.1.into(),
        notes: "Irrigation = max(0, PEV - TP)".into(),
        derivation: Derivation::Irrigation,
        family: Family::Meteorology,
    });
    specs
}

/// Field-level latent values.
struct Latent {
    planted: [f64; 5],
    nuisance: [f64; 10],
    aspect: f64,
}

fn field_level(key: &str, z: &Latent, rng: &mut ChaCha8Rng) -> f64 {
    let s = &z.planted;
    let w = &z.nuisance;
    let t2m = 27.0 + 1.5 * w[0];
    match key {
        "T2M" => t2m,
        "T2M_MAX" => t2m + 5.0 + 0.5 * w[1],
        "T2M_MIN" => t2m - 6.0 - 0.5 * w[1],
        "RH2M" => 75.0 + 8.0 * s[0],
        "ALLSKY_SFC_SW_DWN" => 18.0 + 2.5 * w[2],
        "PEV" => 5.0 + 0.6 * w[3],
        "TP" => 4.5 + 1.5 * w[4],
        "NDVI" => 0.62 + 0.08 * w[5],
        "NIR" => 0.34 + 0.04 * w[6],
        "RED" => 0.07 + 0.01 * w[6].abs(),
        "BLUE" => 0.045,
        "LAI" => 3.2 + 0.8 * s[1],
        "VV" => -11.0 + 1.5 * w[7],
        "VH" => -17.5 + 1.5 * w[8],
        "RVI" => 0.55 + 0.1 * s[2],
        "soil_carbon" => 14.0 + 3.0 * s[3],
        "soc_stock" => 1.1 * (14.0 + 3.0 * s[3]) + 0.25 * rng.sample::<f64, _>(StandardNormal),
        "clay" => 32.0 + 7.0 * w[9],
        "bulk_density" => 1.35 + 0.08 * (0.5 * w[9] + 0.8 * rng.sample::<f64, _>(StandardNormal)),
        "elevation" => 45.0 + 25.0 * (0.4 * w[0] + rng.sample::<f64, _>(StandardNormal)),
        "slope" => 5.0 + 1.6 * s[4],
        "aspect" => z.aspect,
        other => unreachable!("no generator for {other}"),
    }
}

/// Noiseless yield as a smooth function of the planted signals.
pub fn yield_function(s: &[f64; 5]) -> f64 {
    5000.0 + 500.0 * s[0] + 450.0 * s[1].sin() + 400.0 * s[2].tanh() + 350.0 * s[3] + 300.0 * (s[4] + 0.3 * s[4] * s[4])
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Writes a complete benchmark under `root`: `feature_mapping.csv`,
/// `fields.csv`, `fixtures/` and `unicrop.conf`.
pub fn generate(root: &Path, cfg: &SynthConfig) -> Result<SynthSummary> {
    if cfg.fields == 0 || !(0.0..1.0).contains(&cfg.target_r2) || cfg.target_r2 <= 0.0 {
        return Err(Error::InvalidArgument("synthetic benchmark needs fields > 0 and 0 < target_r2 < 1".into()));
    }
    fs::create_dir_all(root).map_err(io_err(root))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let vars = variables();

    let latents: Vec<Latent> = (0..cfg.fields)
        .map(|_| Latent {
            planted: std::array::from_fn(|_| rng.sample(StandardNormal)),
            nuisance: std::array::from_fn(|_| rng.sample(StandardNormal)),
            aspect: rng.random_range(0.0..360.0),
        })
        .collect();
    let signal: Vec<f64> = latents.iter().map(|z| yield_function(&z.planted)).collect();
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let var_signal = signal.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / signal.len() as f64;
    let noise_sd = (var_signal * (1.0 - cfg.target_r2) / cfg.target_r2).sqrt();
    let noise = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let yields: Vec<f64> = signal.iter().map(|s| (s + noise.sample(&mut rng)).max(0.0)).collect();

    let ym = yields.iter().sum::<f64>() / yields.len() as f64;
    let ss_tot: f64 = yields.iter().map(|y| (y - ym).powi(2)).sum();
    let ss_res: f64 = yields.iter().zip(&signal).map(|(y, s)| (y - s).powi(2)).sum();
    let oracle_r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };

    let end = cfg.start + Duration::days(i64::from(cfg.window_days.max(1)) - 1);
    let districts = ["D1", "D2", "D3", "D4", "D5", "D6"];
    let fields: Vec<FieldRecord> = (0..cfg.fields)
        .map(|i| FieldRecord {
            field_id: format!("F{i:04}"),
            lat: 9.5 + (i / 40) as f64 * 0.01,
            lon: 105.2 + (i % 40) as f64 * 0.01,
            window_start: cfg.start,
            window_end: end,
            yield_kg_ha: Some((yields[i] * 10.0).round() / 10.0),
            district: Some(districts[i % districts.len()].to_string()),
            season: Some(if i % 3 == 0 { "Dry" } else { "Wet" }.to_string()),
        })
        .collect();
    write_fields(&root.join("fields.csv"), &fields)?;
    write_feature_mapping(&root.join("feature_mapping.csv"), &mapping(&vars))?;

    let fixtures = root.join("fixtures");
    let mut written = 0;
    let mut missing = 0;
    for (f, z) in fields.iter().zip(&latents) {
        for v in &vars {
            let level = field_level(v.key, z, &mut rng);
            if rng.random_bool(cfg.file_missing) {
                missing += 1;
                continue;
            }
            let path = fixture_path(&fixtures, v.platform, v.key, &f.field_id);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(io_err(dir))?;
            }
            let mut body = String::from("date,value,units\n");
            let step = match v.cadence {
                Cadence::Static => cfg.window_days.max(1),
                Cadence::Every(k) => k,
            };
            let mut day = 0;
            while day < cfg.window_days.max(1) {
                let date = cfg.start + Duration::days(i64::from(day));
                let jitter: f64 = rng.sample(StandardNormal);
                let value = level + v.jitter * jitter;
                let cell = if v.jitter > 0.0 && rng.random_bool(cfg.cell_missing) {
                    String::new()
                } else {
                    format_f64((value * 1e4).round() / 1e4)
                };
                body.push_str(&format!("{},{},{}\n", date.format("%Y-%m-%d"), cell, v.units));
                day += step;
            }
            let mut file = fs::File::create(&path).map_err(io_err(&path))?;
            file.write_all(body.as_bytes()).map_err(io_err(&path))?;
            written += 1;
        }
    }

    let config_path = root.join("unicrop.conf");
    let conf = "\
# synthetic benchmark run
mapping = feature_mapping.csv
fields = fields.csv
fixture_root = fixtures
cache_dir = cache
output_dir = out
offline = true
";
    fs::write(&config_path, conf).map_err(io_err(&config_path))?;

    Ok(SynthSummary {
        root: root.to_path_buf(),
        config_path,
        noise_sd,
        oracle_r2,
        fixture_files: written,
        missing_files: missing,
    })
}
