//! On-disk store for emissivity spectra.
//!
//! Each spectrum is a `nu_hz,emissivity` table whose `#` header records
//! everything that determines its values. A file is only ever served for the
//! exact key it was written under; loading it for another radius, corner,
//! grid, optical table or quadrature setting is an error, never a silent
//! recomputation or reuse.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::cylinder::{EmissivityOptions, FrequencyGrid, SpectralEmissivity};
use crate::error::{Error, Result};
use crate::io::{format_num, parse_numeric_rows, sha256_hex, CsvTable};
use crate::materials::{CornerSelector, RefractiveIndexTable};

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "FIBERTHERM_CACHE_DIR";

/// Identity of one cached spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumKey {
    pub radius: f64,
    pub corner: CornerSelector,
    pub grid_hash: String,
    pub table_hash: String,
    pub options: String,
}

impl SpectrumKey {
    pub fn new(
        radius: f64,
        corner: CornerSelector,
        grid: &FrequencyGrid,
        table: &RefractiveIndexTable,
        opts: &EmissivityOptions,
    ) -> Self {
        SpectrumKey {
            radius,
            corner,
            grid_hash: grid.hash().to_string(),
            table_hash: table.content_hash(),
            options: opts.fingerprint(),
        }
    }

    fn digest(&self) -> String {
        let text = format!(
            "{}|{}|{}|{}|{}",
            format_num(self.radius),
            self.corner,
            self.grid_hash,
            self.table_hash,
            self.options
        );
        sha256_hex(text.as_bytes())[..16].to_string()
    }

    pub fn file_name(&self) -> String {
        format!("fed_{}_a{:.6e}_{}.csv", self.corner, self.radius, self.digest())
    }
}

/// Render a spectrum with its metadata header.
pub fn spectrum_to_csv(spec: &SpectralEmissivity, options: &str) -> String {
    let mut t = CsvTable::new(["nu_hz", "emissivity"])
        .meta("kind", "cylinder spectral emissivity")
        .meta("radius_m", format_num(spec.radius))
        .meta("corner", spec.corner)
        .meta("l_max", spec.l_max)
        .meta("xi_nodes", spec.xi_nodes)
        .meta("grid_hash", &spec.grid_hash)
        .meta("table_hash", &spec.table_hash)
        .meta("options", options);
    for (nu, e) in spec.nu.iter().zip(&spec.emissivity) {
        t.push(&[*nu, *e]);
    }
    t.render()
}

fn header_fields(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter_map(|l| l.strip_prefix('#'))
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Parse a spectrum file; returns the spectrum and its options fingerprint.
pub fn spectrum_from_csv(text: &str) -> Result<(SpectralEmissivity, String)> {
    let meta = header_fields(text);
    let field = |k: &str| {
        meta.get(k)
            .cloned()
            .ok_or_else(|| Error::Parse {
                row: 0,
                msg: format!("emissivity cache header lacks `{k}`"),
            })
    };
    let num = |k: &str| -> Result<f64> {
        field(k)?.parse::<f64>().map_err(|e| Error::Parse {
            row: 0,
            msg: format!("header field `{k}`: {e}"),
        })
    };
    let (_, rows) = parse_numeric_rows(text, 2)?;
    let spec = SpectralEmissivity {
        radius: num("radius_m")?,
        corner: field("corner")?.parse()?,
        nu: rows.iter().map(|r| r[0]).collect(),
        emissivity: rows.iter().map(|r| r[1]).collect(),
        l_max: num("l_max")? as usize,
        xi_nodes: num("xi_nodes")? as usize,
        grid_hash: field("grid_hash")?,
        table_hash: field("table_hash")?,
    };
    Ok((spec, field("options")?))
}

/// Fail unless `spec` (with options fingerprint `options`) belongs to `key`.
pub fn check_key(spec: &SpectralEmissivity, options: &str, key: &SpectrumKey) -> Result<()> {
    let mut bad = Vec::new();
    if spec.radius != key.radius {
        bad.push(format!("radius {} m, wanted {} m", spec.radius, key.radius));
    }
    if spec.corner != key.corner {
        bad.push(format!("corner {}, wanted {}", spec.corner, key.corner));
    }
    if spec.grid_hash != key.grid_hash {
        bad.push("frequency grid differs".to_string());
    }
    if spec.table_hash != key.table_hash {
        bad.push("optical table differs".to_string());
    }
    if options != key.options {
        bad.push(format!("quadrature settings `{options}`, wanted `{}`", key.options));
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::CacheMismatch(bad.join("; ")))
    }
}

/// Directory of cached spectra.
#[derive(Debug, Clone)]
pub struct EmissivityCache {
    dir: PathBuf,
}

impl EmissivityCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        EmissivityCache { dir: dir.into() }
    }

    /// `$FIBERTHERM_CACHE_DIR` if set, else `fallback`.
    pub fn from_env_or(fallback: impl Into<PathBuf>) -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => Self::new(d),
            _ => Self::new(fallback),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &SpectrumKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    /// Cached spectrum for `key`, if present. A file under the key's name
    /// whose header disagrees with the key is reported, not ignored.
    pub fn load(&self, key: &SpectrumKey) -> Result<Option<SpectralEmissivity>> {
        let path = self.path_for(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path.display(), e)),
        };
        let (spec, options) = spectrum_from_csv(&text).map_err(|e| Error::Context {
            context: format!("reading {}", path.display()),
            inner: Box::new(e),
        })?;
        check_key(&spec, &options, key).map_err(|e| Error::Context {
            context: format!("cache file {}", path.display()),
            inner: Box::new(e),
        })?;
        Ok(Some(spec))
    }

    pub fn store(&self, spec: &SpectralEmissivity, key: &SpectrumKey) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(self.dir.display(), e))?;
        let path = self.path_for(key);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, spectrum_to_csv(spec, &key.options)).map_err(|e| Error::io(tmp.display(), e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(path.display(), e))?;
        Ok(path)
    }

    pub fn get_or_compute(
        &self,
        radius: f64,
        table: &RefractiveIndexTable,
        corner: CornerSelector,
        grid: &FrequencyGrid,
        opts: &EmissivityOptions,
    ) -> Result<SpectralEmissivity> {
        let key = SpectrumKey::new(radius, corner, grid, table, opts);
        if let Some(spec) = self.load(&key)? {
            return Ok(spec);
        }
        let spec = SpectralEmissivity::compute(radius, table, corner, grid, opts)?;
        self.store(&spec, &key)?;
        Ok(spec)
    }
}
