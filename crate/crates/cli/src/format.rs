//! Line-oriented text format shared by instance, witness and certificate files.
//!
//! ```text
//! %CEQ 1
//! field 3                      or   field 2^2 mod 1,1,1
//! tag LCE
//! reduction k 1 n 1 m 2 kprime 2 nprime 6     (or reject-reason R, or empty-code)
//! G 2 6
//! 1 1 1 0 0 0
//! 1 0 0 1 1 1
//! H 2 6
//! ...
//! witness
//! S 2 2
//! ...
//! perm 1 2 3 4 5 6
//! diag 1 1 1 1 1 1
//! cert LCE gadget              (or cert LCE rejected R, or cert LCE empty)
//! params n 1 k 1 m 2 nprime 6
//! blocks 1-1 2-3 4-6
//! journal n 1 k 1 rank 1
//! removed-g
//! removed-h
//! ```
//!
//! Every section is optional except the first two lines, but sections appear
//! in this order. Field elements are written as their base-`p` encodings
//! `c0 + c1*p + ...`. `perm` lists `sigma(1) ... sigma(n)`, 1-based, where the
//! `i`-th column of `G*M` is column `sigma(i)` of `G` scaled by the `diag`
//! entry of that source column.

use std::fmt::Write as _;
use std::str::FromStr;

use ceq_core::ce_core::{CEInstance, Journal, ProblemTag, RejectReason, Witness};
use ceq_core::ff::{is_prime, Elem, Field};
use ceq_core::matf::{Mat, MonoMat, PermMat};
use ceq_core::reduction::ReductionCert;
use thiserror::Error;

pub const MAGIC: &str = "%CEQ";
pub const VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct FormatError {
    pub line: usize,
    pub msg: String,
}

/// Header line describing how a reduced instance was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Note {
    Reduction { k: usize, n: usize, m: usize, kprime: usize, nprime: usize },
    RejectReason(RejectReason),
    EmptyCode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CertKind {
    Gadget { cert: ReductionCert, journal: Journal },
    Rejected(RejectReason),
    Empty { journal: Journal },
}

/// What `lift` and `extract` need besides the original instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertSection {
    pub target: ProblemTag,
    pub kind: CertKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub field: Field,
    pub tag: Option<ProblemTag>,
    pub note: Option<Note>,
    pub pair: Option<(Mat, Mat)>,
    pub witness: Option<Witness>,
    pub cert: Option<CertSection>,
}

impl Document {
    pub fn empty(field: &Field) -> Document {
        Document { field: field.clone(), tag: None, note: None, pair: None, witness: None, cert: None }
    }

    pub fn from_instance(inst: &CEInstance) -> Document {
        Document {
            tag: Some(inst.tag()),
            pair: Some((inst.g().clone(), inst.h().clone())),
            ..Document::empty(inst.field())
        }
    }

    pub fn from_witness(field: &Field, w: &Witness) -> Document {
        Document { witness: Some(w.clone()), ..Document::empty(field) }
    }

    /// The `(G, H, tag)` instance, if the file carries one.
    pub fn instance(&self) -> Option<CEInstance> {
        let (g, h) = self.pair.as_ref()?;
        CEInstance::new(g.clone(), h.clone(), self.tag?).ok()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "{MAGIC} {VERSION}");
        let _ = writeln!(w, "field {}", field_spec(&self.field));
        if let Some(tag) = self.tag {
            let _ = writeln!(w, "tag {tag}");
        }
        match self.note {
            Some(Note::Reduction { k, n, m, kprime, nprime }) => {
                let _ = writeln!(w, "reduction k {k} n {n} m {m} kprime {kprime} nprime {nprime}");
            }
            Some(Note::RejectReason(r)) => {
                let _ = writeln!(w, "reject-reason {r}");
            }
            Some(Note::EmptyCode) => {
                let _ = writeln!(w, "empty-code");
            }
            None => {}
        }
        if let Some((g, h)) = &self.pair {
            write_matrix(w, "G", g);
            write_matrix(w, "H", h);
        }
        if let Some(wit) = &self.witness {
            let _ = writeln!(w, "witness");
            write_matrix(w, "S", &wit.s);
            let sigma = wit.m.perm().sigma().iter().map(|s| s + 1);
            write_list(w, "perm", sigma);
            write_list(w, "diag", wit.m.diag().iter().map(|d| d.value()));
        }
        if let Some(cert) = &self.cert {
            match &cert.kind {
                CertKind::Gadget { cert: c, journal } => {
                    let _ = writeln!(w, "cert {} gadget", cert.target);
                    let _ = writeln!(w, "params n {} k {} m {} nprime {}", c.n, c.k, c.m, c.n_prime());
                    let (b1, b2, b3) = (c.block1(), c.block2(), c.block3());
                    let _ = writeln!(
                        w,
                        "blocks {}-{} {}-{} {}-{}",
                        b1.start + 1,
                        b1.end,
                        b2.start + 1,
                        b2.end,
                        b3.start + 1,
                        b3.end
                    );
                    write_journal(w, journal);
                }
                CertKind::Rejected(r) => {
                    let _ = writeln!(w, "cert {} rejected {r}", cert.target);
                }
                CertKind::Empty { journal } => {
                    let _ = writeln!(w, "cert {} empty", cert.target);
                    write_journal(w, journal);
                }
            }
        }
        out
    }
}

fn write_list<I: IntoIterator<Item = T>, T: std::fmt::Display>(w: &mut String, key: &str, items: I) {
    w.push_str(key);
    for x in items {
        let _ = write!(w, " {x}");
    }
    w.push('\n');
}

fn write_matrix(w: &mut String, name: &str, m: &Mat) {
    let _ = writeln!(w, "{name} {} {}", m.rows(), m.cols());
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|e| e.value().to_string()).collect();
        let _ = writeln!(w, "{}", row.join(" "));
    }
}

fn write_journal(w: &mut String, j: &Journal) {
    let _ = writeln!(w, "journal n {} k {} rank {}", j.n, j.k, j.rank);
    write_list(w, "removed-g", j.removed_g.iter().map(|i| i + 1));
    write_list(w, "removed-h", j.removed_h.iter().map(|i| i + 1));
}

/// `p` for prime fields, `p^e mod c0,...,ce` otherwise.
pub fn field_spec(field: &Field) -> String {
    if field.e() == 1 {
        field.p().to_string()
    } else {
        let coeffs: Vec<String> = field.modulus().iter().map(u32::to_string).collect();
        format!("{}^{} mod {}", field.p(), field.e(), coeffs.join(","))
    }
}

/// Parses `p` or `p^e`, with an optional comma-separated modulus `c0,...,ce`.
pub fn parse_field(spec: &str, modulus: Option<&str>) -> Result<Field, String> {
    let spec = spec.trim();
    let (p, e) = match spec.split_once('^') {
        Some((p, e)) => (parse_num::<u64>(p)?, parse_num::<u32>(e)?),
        None => {
            let q = parse_num::<u64>(spec)?;
            if !is_prime(q) {
                return Err(format!(
                    "field order {q} is not prime; extension fields are written p^e (for example 2^2)"
                ));
            }
            (q, 1)
        }
    };
    let coeffs = modulus
        .map(|m| m.split(',').map(|c| parse_num::<u32>(c)).collect::<Result<Vec<_>, _>>())
        .transpose()?;
    Field::new(p, e, coeffs.as_deref()).map_err(|e| e.to_string())
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("`{}` is not a valid number", s.trim()))
}

struct Cursor<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, FormatError> {
        Err(FormatError { line: self.pos.max(1), msg: msg.into() })
    }

    fn peek_key(&self) -> Option<&'a str> {
        self.lines.get(self.pos).map(|l| l.split_whitespace().next().unwrap_or(""))
    }

    fn next(&mut self, what: &str) -> Result<&'a str, FormatError> {
        match self.lines.get(self.pos) {
            Some(l) => {
                self.pos += 1;
                Ok(l)
            }
            None => Err(FormatError { line: self.pos + 1, msg: format!("unexpected end of file, expected {what}") }),
        }
    }

    /// Next line split into words, checking its keyword.
    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>, FormatError> {
        let line = self.next(key)?;
        let words: Vec<&str> = line.split_whitespace().collect();
        if words.first() != Some(&key) {
            return self.err(format!("expected `{key}`, found `{line}`"));
        }
        Ok(words[1..].to_vec())
    }

    fn num<T: FromStr>(&self, word: &str) -> Result<T, FormatError> {
        parse_num(word).or_else(|m| self.err(m))
    }

    /// Parses `k1 v1 k2 v2 ...` with exactly the given keys.
    fn pairs(&self, words: &[&str], keys: &[&str]) -> Result<Vec<usize>, FormatError> {
        if words.len() != 2 * keys.len() || words.iter().step_by(2).zip(keys).any(|(w, k)| w != k) {
            return self.err(format!("expected `{}`", keys.iter().map(|k| format!("{k} <n>")).collect::<Vec<_>>().join(" ")));
        }
        words.iter().skip(1).step_by(2).map(|w| self.num(w)).collect()
    }

    fn matrix(&mut self, field: &Field, name: &str) -> Result<Mat, FormatError> {
        let words = self.keyed(name)?;
        let [r, c] = words[..] else {
            return self.err(format!("expected `{name} <rows> <cols>`"));
        };
        let (rows, cols): (usize, usize) = (self.num(r)?, self.num(c)?);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next("a matrix row")?;
            let entries: Vec<&str> = line.split_whitespace().collect();
            if entries.len() != cols {
                return self.err(format!("row has {} entries, expected {cols}", entries.len()));
            }
            for e in entries {
                data.push(self.elem(field, e)?);
            }
        }
        Ok(Mat::from_elems(field, rows, cols, data))
    }

    fn elem(&self, field: &Field, word: &str) -> Result<Elem, FormatError> {
        let v: u64 = self.num(word)?;
        field.elem(v).or_else(|e| self.err(e.to_string()))
    }

    fn indices(&self, words: &[&str], n: usize) -> Result<Vec<usize>, FormatError> {
        words
            .iter()
            .map(|w| {
                let i: usize = self.num(w)?;
                if i == 0 || i > n {
                    return self.err(format!("index {i} outside 1..={n}"));
                }
                Ok(i - 1)
            })
            .collect()
    }

    fn journal(&mut self) -> Result<Journal, FormatError> {
        let words = self.keyed("journal")?;
        let v = self.pairs(&words, &["n", "k", "rank"])?;
        let (n, k, rank) = (v[0], v[1], v[2]);
        let removed_g = self.keyed("removed-g")?;
        let removed_g = self.indices(&removed_g, n)?;
        let removed_h = self.keyed("removed-h")?;
        let removed_h = self.indices(&removed_h, n)?;
        for list in [&removed_g, &removed_h] {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return self.err("removed columns must be strictly increasing");
            }
        }
        if removed_g.len() != removed_h.len() || rank > k || rank > n - removed_g.len() {
            return self.err("inconsistent journal");
        }
        Ok(Journal { n, k, removed_g, removed_h, rank })
    }
}

impl FromStr for Document {
    type Err = FormatError;

    fn from_str(text: &str) -> Result<Document, FormatError> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        let mut c = Cursor { lines: body.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect(), pos: 0 };

        let words = c.keyed(MAGIC)?;
        match words[..] {
            [v] if v == VERSION.to_string() => {}
            [v] => return c.err(format!("unsupported format version {v}")),
            _ => return c.err(format!("expected `{MAGIC} {VERSION}`")),
        }

        let line = c.next("field")?;
        let field = match line.strip_prefix("field ") {
            Some(rest) => {
                let (spec, modulus) = match rest.split_once(" mod ") {
                    Some((s, m)) => (s, Some(m)),
                    None => (rest, None),
                };
                parse_field(spec, modulus).or_else(|m| c.err(m))?
            }
            None => return c.err("expected `field <p>` or `field <p>^<e> mod <c0,...,ce>`"),
        };
        let mut doc = Document::empty(&field);

        if c.peek_key() == Some("tag") {
            let words = c.keyed("tag")?;
            let [t] = words[..] else { return c.err("expected `tag PCE|SPCE|LCE`") };
            doc.tag = Some(t.parse().or_else(|m: String| c.err(m))?);
        }

        doc.note = match c.peek_key() {
            Some("reduction") => {
                let words = c.keyed("reduction")?;
                let v = c.pairs(&words, &["k", "n", "m", "kprime", "nprime"])?;
                let (k, n, m, kprime, nprime) = (v[0], v[1], v[2], v[3], v[4]);
                if kprime != k + 1 || nprime != n + 2 * n * m + 1 {
                    return c.err("reduction header violates kprime = k + 1, nprime = n + 2nm + 1");
                }
                Some(Note::Reduction { k, n, m, kprime, nprime })
            }
            Some("reject-reason") => {
                let words = c.keyed("reject-reason")?;
                let [r] = words[..] else { return c.err("expected `reject-reason <reason>`") };
                Some(Note::RejectReason(r.parse().or_else(|m: String| c.err(m))?))
            }
            Some("empty-code") => {
                c.keyed("empty-code")?;
                Some(Note::EmptyCode)
            }
            _ => None,
        };

        if c.peek_key() == Some("G") {
            let g = c.matrix(&field, "G")?;
            let h = c.matrix(&field, "H")?;
            if g.shape() != h.shape() {
                return c.err(format!("G is {:?} but H is {:?}", g.shape(), h.shape()));
            }
            if let Some(Note::Reduction { kprime, nprime, .. }) = doc.note {
                if g.shape() != (kprime, nprime) {
                    return c.err("matrix shape disagrees with the reduction header");
                }
            }
            doc.pair = Some((g, h));
        }
        if doc.tag.is_some() != doc.pair.is_some() {
            return c.err("`tag` and the G/H matrices must appear together");
        }

        if c.peek_key() == Some("witness") {
            c.keyed("witness")?;
            let s = c.matrix(&field, "S")?;
            if s.rows() != s.cols() {
                return c.err("S must be square");
            }
            let words = c.keyed("perm")?;
            let n = words.len();
            let sigma = c.indices(&words, n)?;
            let perm = PermMat::from_sigma(sigma).or_else(|_| c.err("perm is not a permutation"))?;
            let words = c.keyed("diag")?;
            if words.len() != n {
                return c.err(format!("diag has {} entries, perm has {n}", words.len()));
            }
            let diag = words.iter().map(|w| c.elem(&field, w)).collect::<Result<Vec<_>, _>>()?;
            let m = MonoMat::new(perm, diag).or_else(|e| c.err(e.to_string()))?;
            doc.witness = Some(Witness::new(s, m));
        }

        if c.peek_key() == Some("cert") {
            let words = c.keyed("cert")?;
            let (target, kind) = match words[..] {
                [t, "gadget"] => (t, None),
                [t, "rejected", r] => (t, Some(CertKind::Rejected(r.parse().or_else(|m: String| c.err(m))?))),
                [t, "empty"] => (t, Some(CertKind::Empty { journal: Journal { n: 0, k: 0, removed_g: vec![], removed_h: vec![], rank: 0 } })),
                _ => return c.err("expected `cert <TAG> gadget|rejected <reason>|empty`"),
            };
            let target: ProblemTag = target.parse().or_else(|m: String| c.err(m))?;
            if target == ProblemTag::Pce {
                return c.err("certificate target must be SPCE or LCE");
            }
            let kind = match kind {
                None => {
                    let words = c.keyed("params")?;
                    let v = c.pairs(&words, &["n", "k", "m", "nprime"])?;
                    let cert = ReductionCert { n: v[0], k: v[1], m: v[2] };
                    if cert.m == 0 || v[3] != cert.n_prime() {
                        return c.err("params violate m >= 1 and nprime = n + 2nm + 1");
                    }
                    let words = c.keyed("blocks")?;
                    let expected = [cert.block1(), cert.block2(), cert.block3()]
                        .iter()
                        .map(|b| format!("{}-{}", b.start + 1, b.end))
                        .collect::<Vec<_>>();
                    if words != expected {
                        return c.err(format!("blocks must be `{}`", expected.join(" ")));
                    }
                    let journal = c.journal()?;
                    if journal.rank != cert.k || journal.n - journal.removed_g.len() != cert.n {
                        return c.err("journal disagrees with params");
                    }
                    CertKind::Gadget { cert, journal }
                }
                Some(CertKind::Empty { .. }) => CertKind::Empty { journal: c.journal()? },
                Some(k) => k,
            };
            doc.cert = Some(CertSection { target, kind });
        }

        if c.pos < c.lines.len() {
            c.pos += 1;
            return c.err(format!("unexpected line `{}`", c.lines[c.pos - 1]));
        }
        Ok(doc)
    }
}
