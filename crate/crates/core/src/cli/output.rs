//! Staged output files: CSV tables with `#` headers and the binary kernel
//! format.
//!
//! Binary layout, little endian throughout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 16    | magic `UNRAVELKERNEL\0\0\0` |
//! | 8     | flag word, bit 0 set for complex values |
//! | 8     | rows |
//! | 8     | columns |
//! | ...   | row-major `f64`, complex as `re, im` pairs |

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use super::CliError;

pub const MAGIC: [u8; 16] = *b"UNRAVELKERNEL\0\0\0";
pub const FLAG_COMPLEX: u64 = 1;

/// Values read back from a kernel file.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFile {
    pub flags: u64,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Interleaved `re, im` when complex.
    pub values: Vec<f64>,
}

impl KernelFile {
    pub fn is_complex(&self) -> bool {
        self.flags & FLAG_COMPLEX != 0
    }

    pub fn complex_at(&self, i: usize, j: usize) -> Complex64 {
        let k = 2 * (i * self.n_cols + j);
        Complex64::new(self.values[k], self.values[k + 1])
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn read_kernel(path: &Path) -> Result<KernelFile, CliError> {
    let mut bytes = Vec::new();
    fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| io_err(path, e))?;
    let bad = |m: &str| CliError::Io(format!("{}: {m}", path.display()));
    if bytes.len() < 40 || bytes[..16] != MAGIC {
        return Err(bad("not a kernel file"));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[16 + 8 * k..24 + 8 * k].try_into().unwrap());
    let (flags, n_rows, n_cols) = (word(0), word(1) as usize, word(2) as usize);
    let per = if flags & FLAG_COMPLEX != 0 { 2 } else { 1 };
    let count = n_rows * n_cols * per;
    if bytes.len() != 40 + 8 * count {
        return Err(bad("length does not match the header"));
    }
    let values =
        bytes[40..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(KernelFile { flags, n_rows, n_cols, values })
}

/// Files are written under a temporary name and renamed by
/// [`Outputs::commit`]; dropping an uncommitted set removes them.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    header: String,
    staged: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    /// `config_toml` becomes the `#` header of every table.
    pub fn new(dir: &Path, config_toml: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut header = String::new();
        for line in config_toml.lines() {
            let _ = writeln!(header, "# {line}");
        }
        Ok(Self { dir: dir.to_path_buf(), header, staged: Vec::new(), committed: false })
    }

    fn stage(&mut self, name: &str) -> PathBuf {
        let tmp = self.dir.join(format!(".{name}.partial"));
        self.staged.push(tmp.clone());
        tmp
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let tmp = self.stage(name);
        let f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        let mut w = BufWriter::new(f);
        w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| io_err(&tmp, e))
    }

    /// A CSV table; `rows` are already formatted.
    pub fn table(&mut self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut s = self.header.clone();
        s.push_str(&columns.join(","));
        s.push('\n');
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.write_bytes(name, s.as_bytes())
    }

    /// The `#` header followed by free text.
    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let s = format!("{}{body}", self.header);
        self.write_bytes(name, s.as_bytes())
    }

    pub fn complex_kernel(
        &mut self,
        name: &str,
        n_rows: usize,
        n_cols: usize,
        values: &[Complex64],
    ) -> Result<(), CliError> {
        let flat: Vec<f64> = values.iter().flat_map(|z| [z.re, z.im]).collect();
        self.kernel(name, FLAG_COMPLEX, n_rows, n_cols, &flat)
    }

    pub fn real_kernel(
        &mut self,
        name: &str,
        n_rows: usize,
        n_cols: usize,
        values: &[f64],
    ) -> Result<(), CliError> {
        self.kernel(name, 0, n_rows, n_cols, values)
    }

    fn kernel(
        &mut self,
        name: &str,
        flags: u64,
        n_rows: usize,
        n_cols: usize,
        values: &[f64],
    ) -> Result<(), CliError> {
        let mut b = Vec::with_capacity(40 + 8 * values.len());
        b.extend_from_slice(&MAGIC);
        for w in [flags, n_rows as u64, n_cols as u64] {
            b.extend_from_slice(&w.to_le_bytes());
        }
        for v in values {
            b.extend_from_slice(&v.to_le_bytes());
        }
        self.write_bytes(name, &b)
    }

    /// Renames every staged file into place and returns the final paths.
    pub fn commit(mut self) -> Result<Vec<PathBuf>, CliError> {
        let mut done = Vec::with_capacity(self.staged.len());
        for tmp in &self.staged {
            let name = tmp.file_name().and_then(|n| n.to_str()).expect("staged name");
            let name = &name[1..name.len() - ".partial".len()];
            let dest = self.dir.join(name);
            fs::rename(tmp, &dest).map_err(|e| io_err(&dest, e))?;
            done.push(dest);
        }
        self.committed = true;
        Ok(done)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.staged {
                let _ = fs::remove_file(p);
            }
        }
    }
}

/// Shortest round-trip representation.
pub fn num(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outputs::new(dir.path(), "a = 1").unwrap();
        let vals = vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)];
        o.complex_kernel("k.bin", 1, 2, &vals).unwrap();
        o.table("t.csv", &["x", "y"], &[vec![num(1.0), num(0.1)]]).unwrap();
        let paths = o.commit().unwrap();
        assert_eq!(paths.len(), 2);
        let k = read_kernel(&dir.path().join("k.bin")).unwrap();
        assert!(k.is_complex());
        assert_eq!((k.n_rows, k.n_cols), (1, 2));
        assert_eq!(k.complex_at(0, 1), vals[1]);
        let t = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(t, "# a = 1\nx,y\n1,0.1\n");
    }

    #[test]
    fn dropped_outputs_leave_nothing() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut o = Outputs::new(dir.path(), "").unwrap();
            o.real_kernel("w.bin", 1, 1, &[1.0]).unwrap();
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
