use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use scfind_tuner::cube::{generate_cube, write_catalog, write_cube, SkyConfig};
use scfind_tuner::{exec, seed, Error, Result};

use crate::config::read_json;

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    /// Cube size in x, y and channels.
    #[arg(long, num_args = 3, value_names = ["NX", "NY", "NZ"])]
    pub dims: Option<Vec<usize>>,
    /// Sources per patch.
    #[arg(long)]
    pub sources: Option<usize>,
    /// Number of patches to write.
    #[arg(long, default_value_t = 1)]
    pub patches: usize,
    /// JSON sky configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// File name prefix.
    #[arg(long, default_value = "patch")]
    pub name: String,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub cube: PathBuf,
    pub truth: PathBuf,
    pub n_sources: usize,
    pub seed: u64,
}

/// Write one cube and truth catalog per patch. Patch `i` uses the seed
/// derived from `(seed, patch, i)`.
pub fn gen(args: &GenArgs, seed_: u64) -> Result<Vec<ManifestEntry>> {
    let mut sky: SkyConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => SkyConfig::default(),
    };
    if let Some(d) = &args.dims {
        sky.dims = [d[0], d[1], d[2]];
    }
    if let Some(n) = args.sources {
        sky.n_sources = n;
    }
    sky.validate()?;
    if args.patches == 0 {
        return Err(Error::Usage("--patches must be at least 1".into()));
    }
    let out: &Path = &args.out;
    let jobs: Vec<(usize, SkyConfig)> = (0..args.patches)
        .map(|i| (i, sky.clone().with_seed(seed::derive(seed_, seed::TAG_PATCH, i as u64))))
        .collect();
    let entries = exec::map(&jobs, |(i, cfg)| -> Result<ManifestEntry> {
        let name = format!("{}_{i:02}", args.name);
        let patch = generate_cube(cfg)?;
        let cube = out.join(format!("{name}.sfcb"));
        let truth = out.join(format!("{name}_truth.csv"));
        write_cube(&cube, &patch.cube)?;
        write_catalog(&truth, &patch.truth)?;
        Ok(ManifestEntry { name, cube, truth, n_sources: patch.truth.len(), seed: cfg.seed })
    });
    entries.into_iter().collect()
}
