//! Subprocess restorers: `{in}` and `{out}` in the command template are
//! replaced by PPM file paths and the command runs under `sh -c`.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::imaging::{load_image, save_image, Image};

use super::RestoreError;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);
const POLL: Duration = Duration::from_millis(5);

static SCRATCH_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Clone, Debug)]
pub struct ExternalHook {
    template: String,
    timeout: Duration,
    // one in-flight subprocess per kind
    lock: Arc<Mutex<()>>,
}

impl PartialEq for ExternalHook {
    fn eq(&self, other: &Self) -> bool {
        self.template == other.template && self.timeout == other.timeout
    }
}

impl ExternalHook {
    pub fn new(template: &str, timeout: Duration) -> Result<Self, RestoreError> {
        if !template.contains("{in}") || !template.contains("{out}") {
            return Err(RestoreError::TemplateInvalid(template.to_string()));
        }
        Ok(Self { template: template.to_string(), timeout, lock: Arc::new(Mutex::new(())) })
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn run(&self, image: &Image) -> Result<Image, String> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let scratch = Scratch::new().map_err(|e| format!("scratch dir: {e}"))?;
        let input = scratch.0.join("in.ppm");
        let output = scratch.0.join("out.ppm");
        save_image(image, &input).map_err(|e| e.to_string())?;
        let cmd = self.template.replace("{in}", &shell_quote(&input)).replace("{out}", &shell_quote(&output));
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("spawn `{cmd}`: {e}"))?;
        let start = Instant::now();
        let status = loop {
            match child.try_wait().map_err(|e| e.to_string())? {
                Some(status) => break status,
                None if start.elapsed() >= self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(format!("`{cmd}` timed out after {:?}", self.timeout));
                }
                None => std::thread::sleep(POLL),
            }
        };
        if !status.success() {
            return Err(format!("`{cmd}` exited with {status}"));
        }
        load_image(&output).map_err(|e| format!("reading hook output: {e}"))
    }
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

struct Scratch(PathBuf);

impl Scratch {
    fn new() -> std::io::Result<Self> {
        let n = SCRATCH_COUNTER.fetch_add(1, Ordering::Relaxed);
        let dir = std::env::temp_dir().join(format!("adaptive-restore-{}-{n}", std::process::id()));
        std::fs::create_dir_all(&dir)?;
        Ok(Self(dir))
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}
