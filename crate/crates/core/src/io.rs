//! Binary tensor files, `key=value` manifests and on-disk streaming sessions.
//!
//! Tensor file layout (all little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `T3DT` |
//! | 4     | `u32` version, currently 1 |
//! | 24    | `u64` n1, n2, n3 |
//! | 8·len | `f64` payload, frontal-slice-major, column-major within a slice |

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::solvers::{Session, SubSolver, TrlsProblem, UpdateReport, UpdateSample};
use crate::tensor::Tensor3;

pub const TENSOR_MAGIC: &[u8; 4] = b"T3DT";
pub const TENSOR_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 3 * 8;

pub fn encode_tensor(t: &Tensor3) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.as_slice().len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    for d in [t.n1(), t.n2(), t.n3()] {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor3> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != TENSOR_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != TENSOR_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = |i: usize| {
        let at = 8 + 8 * i;
        let d = u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        usize::try_from(d).map_err(|_| Error::Format(format!("dimension {d} too large")))
    };
    let (n1, n2, n3) = (dim(0)?, dim(1)?, dim(2)?);
    let len = n1
        .checked_mul(n2)
        .and_then(|v| v.checked_mul(n3))
        .filter(|&v| v.checked_mul(8).is_some())
        .ok_or_else(|| Error::Format("dimension product overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 8 * len {
        return Err(Error::Format(format!(
            "payload has {} bytes, header {n1}x{n2}x{n3} needs {}",
            payload.len(),
            8 * len
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Tensor3::from_vec(n1, n2, n3, data)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor3) -> Result<()> {
    write_durable(path.as_ref(), &encode_tensor(t))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor3> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_tensor(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn write_durable(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    Ok(())
}

/// Writes `bytes` beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = with_suffix(path, ".tmp");
    write_durable(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Ordered `key=value` lines. Blank lines and `#` comments are ignored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("manifest line {}: missing '='", no + 1)))?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Format(format!("manifest is missing '{key}'")))
    }

    pub fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Format(format!("manifest '{key}' has bad value '{raw}'")))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.render().as_bytes())
    }
}

pub fn shape_string(t: &Tensor3) -> String {
    format!("{}x{}x{}", t.n1(), t.n2(), t.n3())
}

pub const SESSION_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";
const JOURNAL_FILE: &str = "commit.journal";
const LOCK_FILE: &str = ".lock";
const STAGED_SUFFIX: &str = ".staged";
const SESSION_FILES: [&str; 4] = ["A.t3d", "B.t3d", "X.t3d", MANIFEST_FILE];

/// How a session solves its single-column subproblems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionSettings {
    pub subsolver: SubSolver,
    pub seed: u64,
}

impl SessionSettings {
    /// The Krylov start-vector seed of a `gkt` subsolver follows `seed`.
    pub fn new(subsolver: SubSolver, seed: u64) -> Self {
        let subsolver = match subsolver {
            SubSolver::Gkt(mut opts) => {
                opts.seed = seed;
                SubSolver::Gkt(opts)
            }
            SubSolver::Direct => SubSolver::Direct,
        };
        Self { subsolver, seed }
    }

    fn write_into(&self, m: &mut Manifest) {
        match self.subsolver {
            SubSolver::Gkt(opts) => {
                m.set("subsolver", "gkt")
                    .set("k", opts.steps)
                    .set("reorthogonalize", opts.reorthogonalize);
            }
            SubSolver::Direct => {
                m.set("subsolver", "direct").set("k", "-");
            }
        }
        m.set("seed", self.seed);
    }

    fn read_from(m: &Manifest) -> Result<Self> {
        let seed = m.parse_value("seed")?;
        let subsolver = match m.require("subsolver")? {
            "direct" => SubSolver::Direct,
            "gkt" => {
                let mut opts = crate::solvers::GktOptions::new(m.parse_value("k")?);
                opts.reorthogonalize = m.parse_value("reorthogonalize")?;
                opts.seed = seed;
                SubSolver::Gkt(opts)
            }
            other => return Err(Error::Format(format!("unknown subsolver '{other}'"))),
        };
        Ok(Self::new(subsolver, seed))
    }
}

/// Exclusive handle on a session directory. Dropping it releases the lock.
#[derive(Debug)]
pub struct SessionDir {
    dir: PathBuf,
    settings: SessionSettings,
    session: Session,
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn acquire_lock(dir: &Path) -> Result<LockGuard> {
    let path = dir.join(LOCK_FILE);
    match OpenOptions::new().write(true).create_new(true).open(&path) {
        Ok(mut f) => {
            writeln!(f, "{}", std::process::id())?;
            Ok(LockGuard(path))
        }
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Session(format!(
            "{} is locked by another writer (remove {} if stale)",
            dir.display(),
            path.display()
        ))),
        Err(e) => Err(e.into()),
    }
}

/// Finishes or discards an interrupted commit. A journal means the staged
/// files are complete and must replace the live ones.
fn recover(dir: &Path) -> Result<()> {
    let journal = dir.join(JOURNAL_FILE);
    if journal.exists() {
        for name in SESSION_FILES {
            let staged = dir.join(format!("{name}{STAGED_SUFFIX}"));
            if staged.exists() {
                fs::rename(&staged, dir.join(name))?;
            }
        }
        fs::remove_file(&journal)?;
    } else {
        for name in SESSION_FILES {
            let staged = dir.join(format!("{name}{STAGED_SUFFIX}"));
            if staged.exists() {
                fs::remove_file(&staged)?;
            }
        }
    }
    Ok(())
}

fn session_manifest(problem: &TrlsProblem, x: &Tensor3, samples: usize, settings: &SessionSettings) -> Manifest {
    let mut m = Manifest::new();
    m.set("format_version", SESSION_FORMAT_VERSION)
        .set("lambda", problem.lambda)
        .set("sample_count", samples)
        .set("a_shape", shape_string(&problem.a))
        .set("b_shape", shape_string(&problem.b))
        .set("x_shape", shape_string(x));
    settings.write_into(&mut m);
    m
}

fn commit_files(dir: &Path, problem: &TrlsProblem, x: &Tensor3, manifest: &Manifest) -> Result<()> {
    let staged = |name: &str| dir.join(format!("{name}{STAGED_SUFFIX}"));
    write_durable(&staged("A.t3d"), &encode_tensor(&problem.a))?;
    write_durable(&staged("B.t3d"), &encode_tensor(&problem.b))?;
    write_durable(&staged("X.t3d"), &encode_tensor(x))?;
    write_durable(&staged(MANIFEST_FILE), manifest.render().as_bytes())?;
    write_atomic(&dir.join(JOURNAL_FILE), b"commit\n")?;
    recover(dir)
}

impl SessionDir {
    /// Creates a new session in `dir` (created if missing; must not already
    /// hold a session).
    pub fn create(
        dir: impl AsRef<Path>,
        problem: TrlsProblem,
        x: Tensor3,
        settings: SessionSettings,
    ) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let _lock = acquire_lock(&dir)?;
        if dir.join(MANIFEST_FILE).exists() {
            return Err(Error::Session(format!("{} already holds a session", dir.display())));
        }
        let settings = SessionSettings::new(settings.subsolver, settings.seed);
        let session = Session::new(problem, x)?;
        let manifest = session_manifest(session.problem(), session.solution(), 0, &settings);
        commit_files(&dir, session.problem(), session.solution(), &manifest)?;
        Ok(Self { dir, settings, session })
    }

    /// Loads a session, completing or discarding any interrupted commit.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let _lock = acquire_lock(&dir)?;
        recover(&dir)?;
        let manifest = Manifest::read(dir.join(MANIFEST_FILE))?;
        let version: u32 = manifest.parse_value("format_version")?;
        if version != SESSION_FORMAT_VERSION {
            return Err(Error::Session(format!("unsupported session version {version}")));
        }
        let a = read_tensor(dir.join("A.t3d"))?;
        let b = read_tensor(dir.join("B.t3d"))?;
        let x = read_tensor(dir.join("X.t3d"))?;
        for (key, t) in [("a_shape", &a), ("b_shape", &b), ("x_shape", &x)] {
            let want = manifest.require(key)?;
            if want != shape_string(t) {
                return Err(Error::Session(format!(
                    "manifest {key}={want} but file holds {}",
                    shape_string(t)
                )));
            }
        }
        let samples: usize = manifest.parse_value("sample_count")?;
        let settings = SessionSettings::read_from(&manifest)?;
        let problem = TrlsProblem::new(a, b, manifest.parse_value("lambda")?)?;
        let session = Session::new(problem, x)?.with_sample_count(samples);
        Ok(Self { dir, settings, session })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn settings(&self) -> SessionSettings {
        self.settings
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    /// Absorbs one sample and commits the grown state. On any failure the
    /// files on disk keep the previous state.
    pub fn update(&mut self, sample: &UpdateSample, subsolver: Option<SubSolver>) -> Result<UpdateReport> {
        let _lock = acquire_lock(&self.dir)?;
        let mut next = self.session.clone();
        let report = next.absorb(sample, subsolver.unwrap_or(self.settings.subsolver))?;
        let manifest = session_manifest(next.problem(), next.solution(), next.sample_count(), &self.settings);
        commit_files(&self.dir, next.problem(), next.solution(), &manifest)?;
        self.session = next;
        Ok(report)
    }

    /// Stages a full commit without publishing it, as if interrupted just
    /// before the commit point.
    #[doc(hidden)]
    pub fn stage_without_commit(&self, problem: &TrlsProblem, x: &Tensor3) -> Result<()> {
        let staged = |name: &str| self.dir.join(format!("{name}{STAGED_SUFFIX}"));
        write_durable(&staged("A.t3d"), &encode_tensor(&problem.a))?;
        write_durable(&staged("B.t3d"), &encode_tensor(&problem.b))?;
        write_durable(&staged("X.t3d"), &encode_tensor(x))?;
        Ok(())
    }
}
