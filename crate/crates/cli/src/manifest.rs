use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

/// Provenance of one command run: enough to repeat it exactly.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    command: &'static str,
    tool_version: &'static str,
    model_format_version: u16,
    inputs: Vec<(String, String)>,
    seeds: Vec<u64>,
    outputs: Vec<String>,
    wall_clock_secs: f64,
}

impl RunManifest {
    pub fn new(command: &'static str, model_format_version: u16) -> Self {
        Self {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            model_format_version,
            inputs: Vec::new(),
            seeds: Vec::new(),
            outputs: Vec::new(),
            wall_clock_secs: 0.0,
        }
    }

    pub fn input(&mut self, role: &str, path: Option<&Path>) {
        if let Some(p) = path {
            self.inputs.push((role.to_string(), p.display().to_string()));
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.seeds.push(seed);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(&mut self, elapsed: Duration) {
        self.wall_clock_secs = elapsed.as_secs_f64();
    }
}

/// `<out>.manifest.json` next to an output file.
pub fn beside(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
