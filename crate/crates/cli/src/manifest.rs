use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use contraflow::network::Network;
use contraflow::optimizer::GaConfig;
use contraflow::simulation::{SimConfig, TrafficDemand};
use serde::{Deserialize, Serialize};

pub const FILE_NAME: &str = "manifest.json";

/// Ties a generated scenario to the settings used to run it. Relative file
/// paths resolve against the manifest's own directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub network: PathBuf,
    pub demand: PathBuf,
    pub sim: SimConfig,
    pub ga: GaConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let manifest: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, base))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Network, demand and settings after merging a manifest with command-line
/// overrides.
pub struct Inputs {
    pub network: Network,
    pub demand: TrafficDemand,
    pub sim: SimConfig,
    pub ga: GaConfig,
    pub out: Option<PathBuf>,
}

pub fn resolve(
    manifest: Option<&Path>,
    network: Option<&Path>,
    demand: Option<&Path>,
) -> Result<Inputs> {
    let (mut sim, mut ga, mut out) = (SimConfig::default(), GaConfig::default(), None);
    let (mut net_path, mut demand_path) = (None, None);
    if let Some(path) = manifest {
        let (m, base) = RunManifest::load(path)?;
        net_path = Some(base.join(&m.network));
        demand_path = Some(base.join(&m.demand));
        sim = m.sim;
        ga = m.ga;
        out = Some(base.join(&m.out));
    }
    if let Some(p) = network {
        net_path = Some(p.to_path_buf());
    }
    if let Some(p) = demand {
        demand_path = Some(p.to_path_buf());
    }
    let (Some(net_path), Some(demand_path)) = (net_path, demand_path) else {
        bail!("need --manifest or both --network and --demand");
    };
    let network = Network::load(&net_path).with_context(|| format!("loading {}", net_path.display()))?;
    let demand =
        TrafficDemand::load(&demand_path).with_context(|| format!("loading {}", demand_path.display()))?;
    demand.validate(&network)?;
    Ok(Inputs { network, demand, sim, ga, out })
}
