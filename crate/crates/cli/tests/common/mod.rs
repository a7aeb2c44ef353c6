#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use reelmind::{ProviderSource, Settings, Workspace};
use reelmind_core::clock::FixedClock;
use reelmind_core::exec::ExecMode;
use reelmind_core::media::NullEngine;
use reelmind_core::testkit::Story;
use reelmind_core::time::Timestamp;

pub const SECS: u64 = 1200;

/// Offline settings over `root/store` with a frozen clock.
pub fn settings(root: &Path, provider: ProviderSource) -> Settings {
    Settings {
        clock: Arc::new(FixedClock::epoch()),
        mode: ExecMode::Sequential,
        ..Settings::new(root.join("store"), provider, Arc::new(NullEngine))
    }
}

pub fn story_settings(root: &Path) -> Settings {
    settings(root, ProviderSource::Story)
}

/// Writes `root/demo.json`, a synthetic video of `SECS` seconds.
pub fn fixture(root: &Path) -> PathBuf {
    let path = root.join("demo.json");
    std::fs::write(&path, Story::media(Timestamp::from_secs(SECS)).to_bytes()).unwrap();
    path
}

pub struct Output {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(root: &Path, args: &[&str]) -> Output {
    cli_with(|| story_settings(root), args)
}

pub fn cli_with(settings: impl FnOnce() -> Settings, args: &[&str]) -> Output {
    let argv = std::iter::once("reelmind").chain(args.iter().copied()).map(String::from).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = reelmind::cli::run(argv, settings, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn workspace(root: &Path) -> Arc<Workspace> {
    Arc::new(Workspace::open(story_settings(root)).unwrap())
}
