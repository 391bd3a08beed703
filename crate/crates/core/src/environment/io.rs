//! Canonical text serialization of environments.
//!
//! Every float is written as a hexadecimal literal, so a save/load cycle is
//! lossless and saving the same environment twice gives identical bytes.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::hexfloat;
use super::{ActionKind, AmbientLattice, ConnectivityPolicy, Environment, GroupAction, Truncation};
use crate::error::{Result, SepError};
use crate::scalar::Scalar;

const MAGIC: &str = "sepsim-environment v1";

fn hex<T: Scalar>(x: T) -> String {
    hexfloat::format(x.as_f64())
}

pub fn write_environment<T: Scalar, W: Write>(env: &Environment<T>, mut w: W) -> Result<()> {
    let d = env.dim();
    let meta = env.meta();
    let mut s = String::new();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "model_tag {}", meta.model_tag).unwrap();
    writeln!(s, "seed {}", meta.seed).unwrap();
    writeln!(s, "dim {d}").unwrap();
    let kind = match env.geometry().kind() {
        ActionKind::Continuum => "continuum",
        ActionKind::Lattice => "lattice",
    };
    writeln!(s, "kind {kind}").unwrap();
    writeln!(s, "box_side {}", hex(env.box_side())).unwrap();
    let basis: Vec<String> = env.geometry().basis().data.iter().map(|v| hex(*v)).collect();
    writeln!(s, "basis {}", basis.join(" ")).unwrap();
    writeln!(s, "intensity {}", hex(env.intensity())).unwrap();
    writeln!(s, "connected {}", meta.connected).unwrap();
    writeln!(s, "restricted {}", meta.restricted).unwrap();
    writeln!(s, "discarded_points {}", meta.discarded_points).unwrap();
    match meta.ambient {
        Some(a) => writeln!(s, "ambient {}", a.tag()).unwrap(),
        None => writeln!(s, "ambient none").unwrap(),
    }
    match &meta.truncation {
        Some(t) => writeln!(
            s,
            "truncation {} {} {} {}",
            hex(t.r_max),
            hex(t.rate_floor),
            hex(t.tail_bound),
            hex(t.floor_dropped)
        )
        .unwrap(),
        None => writeln!(s, "truncation none").unwrap(),
    }
    w.write_all(s.as_bytes())?;
    s.clear();
    writeln!(s, "points {}", env.len()).unwrap();
    for i in 0..env.len() {
        write!(s, "{i}").unwrap();
        for v in env.position(i) {
            write!(s, " {}", hex(*v)).unwrap();
        }
        s.push('\n');
        if s.len() > 1 << 16 {
            w.write_all(s.as_bytes())?;
            s.clear();
        }
    }
    writeln!(s, "edges {}", env.num_edges()).unwrap();
    for e in env.edges() {
        writeln!(s, "{} {} {}", e.i, e.j, hex(e.rate)).unwrap();
        if s.len() > 1 << 16 {
            w.write_all(s.as_bytes())?;
            s.clear();
        }
    }
    writeln!(s, "end").unwrap();
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn save_environment<T: Scalar>(env: &Environment<T>, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_environment(env, &mut w)?;
    w.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    line: usize,
}

impl<R: Read> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> SepError {
        SepError::Parse {
            line: self.line,
            message: msg.into(),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let l = self.next()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(self.err(format!("expected `{key} ...`"))),
        }
    }

    fn float<T: Scalar>(&self, tok: &str) -> Result<T> {
        hexfloat::parse(tok)
            .map(T::lit)
            .ok_or_else(|| self.err(format!("bad float `{tok}`")))
    }

    fn int<N: std::str::FromStr>(&self, tok: &str) -> Result<N> {
        tok.parse().map_err(|_| self.err(format!("bad integer `{tok}`")))
    }

    fn boolean(&self, tok: &str) -> Result<bool> {
        tok.parse().map_err(|_| self.err(format!("bad boolean `{tok}`")))
    }
}

pub fn read_environment<T: Scalar, R: Read>(r: R) -> Result<Environment<T>> {
    let mut lines = Lines {
        inner: BufReader::new(r).lines(),
        line: 0,
    };
    if lines.next()? != MAGIC {
        return Err(lines.err("not an environment file"));
    }
    let model_tag = lines.keyed("model_tag")?;
    let seed: u64 = {
        let v = lines.keyed("seed")?;
        lines.int(&v)?
    };
    let d: usize = {
        let v = lines.keyed("dim")?;
        lines.int(&v)?
    };
    if d == 0 {
        return Err(lines.err("dimension must be positive"));
    }
    let kind = match lines.keyed("kind")?.as_str() {
        "continuum" => ActionKind::Continuum,
        "lattice" => ActionKind::Lattice,
        other => return Err(lines.err(format!("unknown kind `{other}`"))),
    };
    let box_side: T = {
        let v = lines.keyed("box_side")?;
        lines.float(&v)?
    };
    let basis_tokens = lines.keyed("basis")?;
    let basis: Vec<T> = basis_tokens
        .split_whitespace()
        .map(|t| lines.float(t))
        .collect::<Result<_>>()?;
    if basis.len() != d * d {
        return Err(lines.err("basis must have d*d entries"));
    }
    let columns: Vec<Vec<T>> = (0..d).map(|j| (0..d).map(|i| basis[i * d + j]).collect()).collect();
    let geometry = GroupAction::new(kind, &columns)?;
    let intensity: T = {
        let v = lines.keyed("intensity")?;
        lines.float(&v)?
    };
    let connected = {
        let v = lines.keyed("connected")?;
        lines.boolean(&v)?
    };
    let restricted = {
        let v = lines.keyed("restricted")?;
        lines.boolean(&v)?
    };
    let discarded: usize = {
        let v = lines.keyed("discarded_points")?;
        lines.int(&v)?
    };
    let ambient = match lines.keyed("ambient")?.as_str() {
        "none" => None,
        tag => Some(AmbientLattice::from_tag(tag).ok_or_else(|| lines.err(format!("unknown ambient `{tag}`")))?),
    };
    let trunc_line = lines.keyed("truncation")?;
    let truncation = if trunc_line == "none" {
        None
    } else {
        let t: Vec<T> = trunc_line
            .split_whitespace()
            .map(|tok| lines.float(tok))
            .collect::<Result<_>>()?;
        if t.len() != 4 {
            return Err(lines.err("truncation needs 4 values"));
        }
        Some(Truncation {
            r_max: t[0],
            rate_floor: t[1],
            tail_bound: t[2],
            floor_dropped: t[3],
        })
    };

    let mut b = Environment::builder(geometry, box_side);
    let n: usize = {
        let v = lines.keyed("points")?;
        lines.int(&v)?
    };
    let mut x = vec![T::zero(); d];
    for k in 0..n {
        let l = lines.next()?;
        let mut toks = l.split_whitespace();
        let idx: usize = lines.int(toks.next().unwrap_or(""))?;
        if idx != k {
            return Err(lines.err(format!("expected point {k}")));
        }
        for slot in x.iter_mut() {
            *slot = lines.float(toks.next().ok_or_else(|| lines.err("missing coordinate"))?)?;
        }
        if toks.next().is_some() {
            return Err(lines.err("too many coordinates"));
        }
        b.point(&x);
    }
    let m: usize = {
        let v = lines.keyed("edges")?;
        lines.int(&v)?
    };
    let mut prev: Option<(usize, usize)> = None;
    for _ in 0..m {
        let l = lines.next()?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(lines.err("edge line needs `i j rate`"));
        }
        let i: usize = lines.int(toks[0])?;
        let j: usize = lines.int(toks[1])?;
        if i >= j || prev.is_some_and(|p| p >= (i, j)) {
            return Err(lines.err("edges must be sorted with i < j and no repeats"));
        }
        prev = Some((i, j));
        b.edge(i, j, lines.float(toks[2])?);
    }
    if lines.next()? != "end" {
        return Err(lines.err("expected `end`"));
    }
    let mut env = b
        .model_tag(model_tag)
        .seed(seed)
        .ambient(ambient)
        .truncation(truncation)
        .build(ConnectivityPolicy::Keep)?;
    if env.intensity() != intensity {
        return Err(SepError::Parse {
            line: 0,
            message: "stored intensity disagrees with point count and volume".into(),
        });
    }
    env.meta.connected = connected;
    env.meta.restricted = restricted;
    env.meta.discarded_points = discarded;
    Ok(env)
}

pub fn load_environment<T: Scalar>(path: &Path) -> Result<Environment<T>> {
    read_environment(std::fs::File::open(path)?)
}
