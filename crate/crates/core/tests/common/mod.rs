#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use serde_json::Value;
use xnec::corpus::{load_manifest, save_manifest};
use xnec::fixture::{generate, FixturePaths, FixtureSpec};

pub const BIN: &str = env!("CARGO_BIN_EXE_xnec");

pub fn fixture(spec: &FixtureSpec, dir: &Path) -> FixturePaths {
    generate(spec, dir).expect("fixture generation")
}

/// Writes a manifest holding only the first `n` clips, next to the original
/// so media paths still resolve.
pub fn truncated_manifest(paths: &FixturePaths, n: usize) -> PathBuf {
    let mut corpus = load_manifest(&paths.manifest).unwrap();
    corpus.clips.truncate(n);
    let out = paths.manifest.with_file_name(format!("first{n}.json"));
    save_manifest(&corpus, &out).unwrap();
    out
}

pub fn xnec(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("xnec runs")
}

/// An `xnec serve` child process on an ephemeral port.
pub struct Server {
    child: Option<Child>,
    pub base: String,
}

impl Server {
    pub fn start(manifest: &Path, log: &Path, seed: u64, annotators: &[&str]) -> Server {
        let mut cmd = Command::new(BIN);
        cmd.args(["--seed", &seed.to_string(), "serve", "--port", "0"])
            .arg("--manifest")
            .arg(manifest)
            .arg("--log")
            .arg(log)
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        if !annotators.is_empty() {
            cmd.args(["--annotators", &annotators.join(",")]);
        }
        let mut child = cmd.spawn().expect("server starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected banner {line:?}"));
        Server { base: format!("http://{addr}"), child: Some(child) }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    /// SIGKILL, no shutdown hooks.
    pub fn kill(&mut self) {
        if let Some(mut c) = self.child.take() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.kill();
    }
}

fn agent() -> ureq::Agent {
    ureq::AgentBuilder::new().timeout(Duration::from_secs(20)).build()
}

fn finish(r: Result<ureq::Response, ureq::Error>) -> Result<(u16, Value), String> {
    match r {
        Ok(resp) => {
            let code = resp.status();
            Ok((code, resp.into_json().unwrap_or(Value::Null)))
        }
        Err(ureq::Error::Status(code, resp)) => Ok((code, resp.into_json().unwrap_or(Value::Null))),
        Err(e) => Err(e.to_string()),
    }
}

/// Status and JSON body; `Err` only for transport failures.
pub fn try_request(method: &str, url: &str, body: Option<&Value>) -> Result<(u16, Value), String> {
    let req = agent().request(method, url);
    finish(match body {
        Some(b) => req.send_json(b.clone()),
        None => req.call(),
    })
}

pub fn request(method: &str, url: &str, body: Option<&Value>) -> (u16, Value) {
    try_request(method, url, body).unwrap_or_else(|e| panic!("{method} {url}: {e}"))
}

pub fn get_text(url: &str) -> (u16, String, Option<String>) {
    let resp = agent().get(url).call().expect("GET succeeds");
    let incomplete = resp.header("x-export-incomplete").map(str::to_string);
    (resp.status(), resp.into_string().unwrap(), incomplete)
}
