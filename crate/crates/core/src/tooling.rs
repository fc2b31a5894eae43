// SPDX-License-Identifier: Apache-2.0

//! Simulator and synthesis drivers with a normalized output contract.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::model::PpaMetrics;

pub const SIM_TIMEOUT: Duration = Duration::from_secs(60);
pub const SYNTH_TIMEOUT: Duration = Duration::from_secs(300);
pub const REPORT_FILE: &str = "ppa.rpt";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "errors", rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail(u32),
    Indeterminate,
}

impl Verdict {
    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub vector: usize,
    pub index: usize,
    pub port: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub vector: usize,
    pub index: usize,
    pub port: String,
    pub expected: String,
    pub got: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimResult {
    pub compiled: bool,
    pub ran: bool,
    pub verdict: Verdict,
    pub stdout: String,
    pub stderr: String,
    pub samples: Vec<Sample>,
    pub mismatches: Vec<Mismatch>,
    /// Why the verdict is indeterminate, when it is.
    pub reason: Option<String>,
}

impl SimResult {
    fn from_output(compiled: bool, ran: bool, stdout: String, stderr: String, reason: Option<String>) -> Self {
        let parsed = parse_sim_output(&stdout);
        let (verdict, reason) = match (parsed.verdict, reason) {
            (_, Some(r)) => (Verdict::Indeterminate, Some(r)),
            (Some(v), None) if compiled && ran => (v, None),
            (Some(_), None) => (Verdict::Indeterminate, Some("simulation did not complete".into())),
            (None, None) => (Verdict::Indeterminate, Some("no result line in simulator output".into())),
        };
        Self {
            compiled,
            ran,
            verdict,
            stdout,
            stderr,
            samples: parsed.samples,
            mismatches: parsed.mismatches,
            reason,
        }
    }

    /// Diagnostics suitable for a repair prompt.
    pub fn error_log(&self) -> String {
        let mut s = String::new();
        if let Some(r) = &self.reason {
            s.push_str(r);
            s.push('\n');
        }
        if !self.stderr.is_empty() {
            s.push_str(&self.stderr);
            if !self.stderr.ends_with('\n') {
                s.push('\n');
            }
        }
        for l in self.stdout.lines().filter(|l| l.starts_with("POET_MISMATCH") || l.starts_with("POET_RESULT")) {
            s.push_str(l);
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedOutput {
    pub samples: Vec<Sample>,
    pub mismatches: Vec<Mismatch>,
    pub verdict: Option<Verdict>,
}

fn field<'a>(tok: Option<&'a str>, key: &str) -> Option<&'a str> {
    tok?.strip_prefix(key)?.strip_prefix('=')
}

fn parse_sample(rest: &str) -> Option<Sample> {
    let mut it = rest.split_whitespace();
    let vector = field(it.next(), "v")?.parse().ok()?;
    let index = field(it.next(), "t")?.parse().ok()?;
    let (port, value) = it.next()?.split_once('=')?;
    Some(Sample { vector, index, port: port.into(), value: value.into() })
}

fn parse_mismatch(rest: &str) -> Option<Mismatch> {
    let mut it = rest.split_whitespace();
    let vector = field(it.next(), "v")?.parse().ok()?;
    let index = field(it.next(), "t")?.parse().ok()?;
    let port = it.next()?.to_string();
    let expected = field(it.next(), "expected")?.to_string();
    let got = field(it.next(), "got")?.to_string();
    Some(Mismatch { vector, index, port, expected, got })
}

/// Extract sample, mismatch and result lines. The last result line wins.
pub fn parse_sim_output(stdout: &str) -> ParsedOutput {
    let mut out = ParsedOutput::default();
    for line in stdout.lines().map(str::trim) {
        if let Some(rest) = line.strip_prefix("POET_SAMPLE ") {
            out.samples.extend(parse_sample(rest));
        } else if let Some(rest) = line.strip_prefix("POET_MISMATCH ") {
            out.mismatches.extend(parse_mismatch(rest));
        } else if let Some(rest) = line.strip_prefix("POET_RESULT: ") {
            if rest == "PASS" {
                out.verdict = Some(Verdict::Pass);
            } else if let Some(n) = rest.strip_prefix("FAIL errors=").and_then(|n| n.parse().ok()) {
                out.verdict = Some(Verdict::Fail(n));
            }
        }
    }
    out
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("report is missing {0}")]
    MissingKey(&'static str),
    #[error("report value {key}={value} is not a positive finite number")]
    InvalidValue { key: String, value: String },
}

/// Parse `area_um2=`, `cpd_ns=` and `power_uw=` lines; `#` lines are comments.
pub fn parse_ppa(text: &str) -> Result<PpaMetrics, ReportError> {
    let (mut area, mut cpd, mut power) = (None, None, None);
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ReportError::InvalidValue { key: line.into(), value: String::new() });
        };
        let (k, v) = (k.trim(), v.trim());
        let slot = match k {
            "area_um2" => &mut area,
            "cpd_ns" => &mut cpd,
            "power_uw" => &mut power,
            _ => continue,
        };
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() && x > 0.0 => *slot = Some(x),
            _ => return Err(ReportError::InvalidValue { key: k.into(), value: v.into() }),
        }
    }
    Ok(PpaMetrics {
        area: area.ok_or(ReportError::MissingKey("area_um2"))?,
        delay: cpd.ok_or(ReportError::MissingKey("cpd_ns"))?,
        power: power.ok_or(ReportError::MissingKey("power_uw"))?,
    })
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("tool not found: {0}")]
    ToolNotFound(String),
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    #[error("synthesis failed: {0}")]
    SynthesisFailed(String),
    #[error("report parse error: {0}")]
    ReportParse(#[from] ReportError),
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("io: {0}")]
    Io(String),
}

fn io_err(e: std::io::Error) -> ToolError {
    ToolError::Io(e.to_string())
}

/// Shell command template. Placeholders: `{design}`, `{testbench}`, `{workdir}`, `{out}`, `{liberty}`, `{top}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolCommand {
    pub template: String,
    #[serde(with = "secs")]
    pub timeout: Duration,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl ToolCommand {
    pub fn new(template: impl Into<String>, timeout: Duration) -> Result<Self, ToolError> {
        let c = Self { template: template.into(), timeout };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ToolError> {
        if self.template.trim().is_empty() {
            return Err(ToolError::InvalidCommand("empty command template".into()));
        }
        if self.timeout.is_zero() {
            return Err(ToolError::InvalidCommand("timeout must be positive".into()));
        }
        Ok(())
    }

    pub fn expand(&self, vars: &[(&str, &str)]) -> String {
        let mut s = self.template.clone();
        for (k, v) in vars {
            s = s.replace(&format!("{{{k}}}"), &shell_quote(v));
        }
        s
    }

    /// The program the template starts with, if it can be resolved.
    pub fn program(&self) -> Option<String> {
        self.template.split_whitespace().next().map(str::to_string)
    }
}

fn shell_quote(s: &str) -> String {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "/._-+:".contains(c)) {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', "'\\''"))
    }
}

/// Look a program up on `PATH`, or check it directly when it contains a slash.
pub fn find_program(name: &str) -> Option<PathBuf> {
    if name.contains('/') {
        let p = PathBuf::from(name);
        return p.is_file().then_some(p);
    }
    std::env::var_os("PATH").and_then(|paths| {
        std::env::split_paths(&paths)
            .map(|d| d.join(name))
            .find(|p| p.is_file())
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommandOutput {
    pub status: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
}

/// Run `sh -c <cmd>` in `workdir`; output goes to `<log>.stdout` / `<log>.stderr` there.
pub fn run_shell(cmd: &str, workdir: &Path, timeout: Duration, log: &str) -> Result<CommandOutput, ToolError> {
    let out_path = workdir.join(format!("{log}.stdout"));
    let err_path = workdir.join(format!("{log}.stderr"));
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .current_dir(workdir)
        .stdin(Stdio::null())
        .stdout(File::create(&out_path).map_err(io_err)?)
        .stderr(File::create(&err_path).map_err(io_err)?)
        .spawn()
        .map_err(|e| ToolError::ToolNotFound(format!("sh: {e}")))?;
    let status = child.wait_timeout(timeout).map_err(io_err)?;
    let timed_out = status.is_none();
    let code = match status {
        Some(s) => s.code(),
        None => {
            let _ = child.kill();
            let _ = child.wait();
            None
        }
    };
    let read = |p: &Path| String::from_utf8_lossy(&std::fs::read(p).unwrap_or_default()).into_owned();
    Ok(CommandOutput {
        status: code,
        stdout: read(&out_path),
        stderr: read(&err_path),
        timed_out,
    })
}

pub trait SimDriver: Send + Sync {
    /// Simulate `design` together with `testbench` inside `workdir`.
    fn run_sim(&self, design: &str, testbench: &str, workdir: &Path) -> Result<SimResult, ToolError>;
}

pub trait SynthDriver: Send + Sync {
    fn synthesize(&self, design: &str, top: &str, workdir: &Path) -> Result<PpaMetrics, ToolError>;
}

fn write_sources(design: &str, testbench: &str, workdir: &Path) -> Result<(PathBuf, PathBuf), ToolError> {
    std::fs::create_dir_all(workdir).map_err(io_err)?;
    let d = workdir.join("design.v");
    let t = workdir.join("testbench.v");
    std::fs::write(&d, design).map_err(io_err)?;
    std::fs::write(&t, testbench).map_err(io_err)?;
    Ok((d, t))
}

/// In-process simulation with the bundled event-driven simulator.
#[derive(Clone, Debug)]
pub struct BuiltinSim {
    pub timeout: Duration,
    pub max_time: u64,
}

impl Default for BuiltinSim {
    fn default() -> Self {
        Self { timeout: SIM_TIMEOUT, max_time: 1_000_000 }
    }
}

impl SimDriver for BuiltinSim {
    fn run_sim(&self, design: &str, testbench: &str, workdir: &Path) -> Result<SimResult, ToolError> {
        write_sources(design, testbench, workdir)?;
        let opts = poet_vsim::SimOptions {
            max_time: self.max_time,
            deadline: Some(Instant::now() + self.timeout),
            ..Default::default()
        };
        let res = match poet_vsim::simulate(&[design, testbench], &opts) {
            Ok(out) => {
                let reason = (!out.finished).then(|| format!("simulation stopped at time {} without $finish", out.end_time));
                SimResult::from_output(true, out.finished, out.stdout, String::new(), reason)
            }
            Err(poet_vsim::SimError::Compile(e)) => {
                SimResult::from_output(false, false, String::new(), format!("compile error: {e}"), Some("compilation failed".into()))
            }
            Err(e @ poet_vsim::SimError::Runtime { .. }) => {
                SimResult::from_output(true, false, String::new(), e.to_string(), Some("simulation aborted".into()))
            }
        };
        std::fs::write(workdir.join("sim.stdout"), &res.stdout).map_err(io_err)?;
        std::fs::write(workdir.join("sim.stderr"), &res.stderr).map_err(io_err)?;
        Ok(res)
    }
}

/// External simulator invoked through a shell template.
#[derive(Clone, Debug)]
pub struct CommandSim {
    pub cmd: ToolCommand,
}

impl SimDriver for CommandSim {
    fn run_sim(&self, design: &str, testbench: &str, workdir: &Path) -> Result<SimResult, ToolError> {
        let (d, t) = write_sources(design, testbench, workdir)?;
        let out = workdir.join("sim.out");
        let (ds, ts, ws, os) = (d.to_string_lossy(), t.to_string_lossy(), workdir.to_string_lossy(), out.to_string_lossy());
        let line = self
            .cmd
            .expand(&[("design", &ds), ("testbench", &ts), ("workdir", &ws), ("out", &os)]);
        let o = run_shell(&line, workdir, self.cmd.timeout, "sim")?;
        if o.status == Some(127) {
            return Err(ToolError::ToolNotFound(self.cmd.program().unwrap_or_default()));
        }
        if o.timed_out {
            return Ok(SimResult::from_output(true, false, o.stdout, o.stderr, Some(format!("timed out after {:?}", self.cmd.timeout))));
        }
        let has_result = parse_sim_output(&o.stdout).verdict.is_some();
        let ok = o.status == Some(0);
        let compiled = ok || has_result;
        let reason = (!ok && !has_result).then(|| format!("simulator exited with status {:?}", o.status));
        Ok(SimResult::from_output(compiled, compiled, o.stdout, o.stderr, reason))
    }
}

/// Reads `// ppa: area_um2=.. cpd_ns=.. power_uw=..` comments from the design itself.
#[derive(Clone, Copy, Debug, Default)]
pub struct AnnotatedSynth;

pub fn ppa_annotation(source: &str) -> Option<String> {
    source.lines().find_map(|l| {
        let rest = l.trim().strip_prefix("//")?.trim().strip_prefix("ppa:")?;
        Some(rest.split_whitespace().collect::<Vec<_>>().join("\n"))
    })
}

impl SynthDriver for AnnotatedSynth {
    fn synthesize(&self, design: &str, _top: &str, workdir: &Path) -> Result<PpaMetrics, ToolError> {
        std::fs::create_dir_all(workdir).map_err(io_err)?;
        std::fs::write(workdir.join("design.v"), design).map_err(io_err)?;
        let report = ppa_annotation(design).ok_or_else(|| ToolError::SynthesisFailed("design carries no ppa annotation".into()))?;
        std::fs::write(workdir.join(REPORT_FILE), format!("{report}\n")).map_err(io_err)?;
        Ok(parse_ppa(&report)?)
    }
}

/// Synthesis adapter that must leave a normalized report at `{out}`.
#[derive(Clone, Debug)]
pub struct CommandSynth {
    pub cmd: ToolCommand,
    pub liberty: String,
}

impl SynthDriver for CommandSynth {
    fn synthesize(&self, design: &str, top: &str, workdir: &Path) -> Result<PpaMetrics, ToolError> {
        if let Some(p) = self.cmd.program() {
            if p.contains('/') && find_program(&p).is_none() {
                return Err(ToolError::ToolNotFound(p));
            }
        }
        std::fs::create_dir_all(workdir).map_err(io_err)?;
        let d = workdir.join("design.v");
        std::fs::write(&d, design).map_err(io_err)?;
        let out = workdir.join(REPORT_FILE);
        let _ = std::fs::remove_file(&out);
        let (ds, ws, os) = (d.to_string_lossy(), workdir.to_string_lossy(), out.to_string_lossy());
        let line = self.cmd.expand(&[
            ("design", &ds),
            ("workdir", &ws),
            ("out", &os),
            ("liberty", &self.liberty),
            ("top", top),
        ]);
        let o = run_shell(&line, workdir, self.cmd.timeout, "synth")?;
        if o.status == Some(127) {
            return Err(ToolError::ToolNotFound(self.cmd.program().unwrap_or_default()));
        }
        if o.timed_out {
            return Err(ToolError::Timeout(self.cmd.timeout));
        }
        if o.status != Some(0) {
            return Err(ToolError::SynthesisFailed(format!("exit status {:?}: {}", o.status, tail(&o.stderr, 2000))));
        }
        let text = std::fs::read_to_string(&out).map_err(|_| ToolError::SynthesisFailed(format!("no report at {}", out.display())))?;
        Ok(parse_ppa(&text)?)
    }
}

fn tail(s: &str, n: usize) -> &str {
    let start = s.len().saturating_sub(n);
    let start = (start..=s.len()).find(|&i| s.is_char_boundary(i)).unwrap_or(s.len());
    &s[start..]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppa_report() {
        let m = parse_ppa("# adder_carry\narea_um2=52.14\ncpd_ns=0.50\npower_uw=32.50\n").unwrap();
        assert_eq!(m, PpaMetrics { power: 32.5, area: 52.14, delay: 0.5 });
        assert_eq!(parse_ppa("area_um2=1\ncpd_ns=1"), Err(ReportError::MissingKey("power_uw")));
        assert!(matches!(parse_ppa("cpd_ns=-1"), Err(ReportError::InvalidValue { .. })));
        assert!(matches!(parse_ppa("area_um2=abc"), Err(ReportError::InvalidValue { .. })));
    }

    #[test]
    fn output_lines() {
        let out = "POET_SAMPLE v=0 t=1 sum=1\nnoise\nPOET_MISMATCH v=1 t=0 sum expected=1 got=0\nPOET_RESULT: FAIL errors=2\n";
        let p = parse_sim_output(out);
        assert_eq!(p.samples, vec![Sample { vector: 0, index: 1, port: "sum".into(), value: "1".into() }]);
        assert_eq!(p.mismatches[0].got, "0");
        assert_eq!(p.verdict, Some(Verdict::Fail(2)));
        assert_eq!(parse_sim_output("POET_RESULT: PASS").verdict, Some(Verdict::Pass));
        assert_eq!(parse_sim_output("POET_RESULT: PASSED").verdict, None);
    }

    #[test]
    fn builtin_driver_verdicts() {
        let dir = tempfile::tempdir().unwrap();
        let sim = BuiltinSim::default();
        let dut = "module m(output y); assign y = 1'b1; endmodule";
        let tb = "module tb; wire y; m u(y); initial begin #1 if (y === 1'b1) $display(\"POET_RESULT: PASS\"); $finish; end endmodule";
        let r = sim.run_sim(dut, tb, &dir.path().join("a")).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let r = sim.run_sim("module m(output y); assign y = ; endmodule", tb, &dir.path().join("b")).unwrap();
        assert!(!r.compiled);
        assert_eq!(r.verdict, Verdict::Indeterminate);
        assert!(r.stderr.contains("compile error"));
        let runaway = "module tb; reg c = 0; always #1 c = ~c; endmodule";
        let r = BuiltinSim { max_time: 100, ..Default::default() }.run_sim(dut, runaway, &dir.path().join("c")).unwrap();
        assert_eq!(r.verdict, Verdict::Indeterminate);
    }

    #[test]
    fn command_drivers() {
        let dir = tempfile::tempdir().unwrap();
        let synth = CommandSynth {
            cmd: ToolCommand::new("printf 'area_um2=52.14\\ncpd_ns=0.5\\npower_uw=32.5\\n' > {out}", Duration::from_secs(10)).unwrap(),
            liberty: String::new(),
        };
        let m = synth.synthesize("module m; endmodule", "m", dir.path()).unwrap();
        assert_eq!(m.power, 32.5);
        let missing = CommandSynth {
            cmd: ToolCommand::new("/nonexistent/adapter.sh {design}", Duration::from_secs(10)).unwrap(),
            liberty: String::new(),
        };
        assert!(matches!(missing.synthesize("x", "m", dir.path()), Err(ToolError::ToolNotFound(_))));
        let slow = CommandSim { cmd: ToolCommand::new("sleep 5", Duration::from_millis(100)).unwrap() };
        let r = slow.run_sim("d", "t", &dir.path().join("s")).unwrap();
        assert_eq!(r.verdict, Verdict::Indeterminate);
        let echo = CommandSim { cmd: ToolCommand::new("echo 'POET_RESULT: PASS'", Duration::from_secs(10)).unwrap() };
        assert_eq!(echo.run_sim("d", "t", &dir.path().join("e")).unwrap().verdict, Verdict::Pass);
        assert!(ToolCommand::new("", Duration::from_secs(1)).is_err());
    }

    #[test]
    fn annotation_stub() {
        let dir = tempfile::tempdir().unwrap();
        let src = "// ppa: area_um2=47.61 cpd_ns=0.32 power_uw=28.30\nmodule m; endmodule";
        let m = AnnotatedSynth.synthesize(src, "m", dir.path()).unwrap();
        assert_eq!(m, PpaMetrics { power: 28.3, area: 47.61, delay: 0.32 });
        assert!(AnnotatedSynth.synthesize("module m; endmodule", "m", dir.path()).is_err());
    }
}
