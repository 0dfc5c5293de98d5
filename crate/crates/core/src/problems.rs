//! Test systems: finite-difference Poisson matrices on the unit interval,
//! square and cube, and Matrix Market ingestion for external operators.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Linear system `A u = f`.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: Arc<SparseMatrix>,
    pub rhs: Vec<f64>,
    pub symmetric: bool,
}

impl SparseSystem {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidMatrix(format!(
                "matrix is {}x{}, expected square",
                matrix.n_rows(),
                matrix.n_cols()
            )));
        }
        crate::error::check_len(matrix.n_rows(), rhs.len())?;
        let symmetric = matrix.is_symmetric(1e-12);
        Ok(Self {
            matrix: Arc::new(matrix),
            rhs,
            symmetric,
        })
    }

    pub fn n(&self) -> usize {
        self.rhs.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Poisson1d,
    Poisson2d,
    Poisson3d,
    MatrixFile,
}

impl ProblemKind {
    pub fn dimension(self) -> Option<usize> {
        match self {
            ProblemKind::Poisson1d => Some(1),
            ProblemKind::Poisson2d => Some(2),
            ProblemKind::Poisson3d => Some(3),
            ProblemKind::MatrixFile => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Poisson1d => "poisson1d",
            ProblemKind::Poisson2d => "poisson2d",
            ProblemKind::Poisson3d => "poisson3d",
            ProblemKind::MatrixFile => "matrix_file",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson1d" => Ok(Self::Poisson1d),
            "poisson2d" => Ok(Self::Poisson2d),
            "poisson3d" => Ok(Self::Poisson3d),
            "matrix_file" => Ok(Self::MatrixFile),
            other => Err(Error::Config(format!("unknown problem kind `{other}`"))),
        }
    }
}

/// `grid_dims` counts interior grid points per axis, so `h = 1/(n+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub grid_dims: Vec<usize>,
    pub file_path: Option<PathBuf>,
    pub rhs_path: Option<PathBuf>,
}

impl ProblemSpec {
    pub fn poisson(dims: &[usize]) -> Self {
        let kind = match dims.len() {
            1 => ProblemKind::Poisson1d,
            2 => ProblemKind::Poisson2d,
            _ => ProblemKind::Poisson3d,
        };
        Self {
            kind,
            grid_dims: dims.to_vec(),
            file_path: None,
            rhs_path: None,
        }
    }

    pub fn matrix_file(path: impl Into<PathBuf>) -> Self {
        Self {
            kind: ProblemKind::MatrixFile,
            grid_dims: Vec::new(),
            file_path: Some(path.into()),
            rhs_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind.dimension() {
            Some(d) => {
                if self.grid_dims.len() != d {
                    return Err(Error::Config(format!(
                        "{} needs {d} grid dimensions, got {}",
                        self.kind.name(),
                        self.grid_dims.len()
                    )));
                }
                if let Some(&g) = self.grid_dims.iter().find(|&&g| g < 2) {
                    return Err(Error::Config(format!(
                        "grid too small: {g} interior points on an axis (need at least 2)"
                    )));
                }
                if self.file_path.is_some() {
                    return Err(Error::Config("file_path given for a generated problem".into()));
                }
                Ok(())
            }
            None => {
                if self.file_path.is_none() {
                    return Err(Error::Config("matrix_file problem needs a file path".into()));
                }
                Ok(())
            }
        }
    }

    pub fn build(&self) -> Result<SparseSystem> {
        self.validate()?;
        match self.kind {
            ProblemKind::MatrixFile => {
                let path = self.file_path.as_ref().expect("validated");
                match &self.rhs_path {
                    Some(rhs) => load_matrix_market_with_rhs(path, rhs),
                    None => load_matrix_market(path),
                }
            }
            _ => build_poisson(self),
        }
    }
}

/// Standard 3/5/7-point Laplacian with homogeneous Dirichlet boundary on the
/// interior grid, lexicographic ordering with the first axis fastest.
pub fn build_poisson(spec: &ProblemSpec) -> Result<SparseSystem> {
    if spec.kind == ProblemKind::MatrixFile {
        return Err(Error::Config("build_poisson called on a matrix_file problem".into()));
    }
    spec.validate()?;
    let dims = &spec.grid_dims;
    let n: usize = dims.iter().product();
    let inv_h2: Vec<f64> = dims
        .iter()
        .map(|&g| {
            let h = 1.0 / (g as f64 + 1.0);
            1.0 / (h * h)
        })
        .collect();
    let diag: f64 = inv_h2.iter().map(|w| 2.0 * w).sum();
    let mut strides = vec![1usize; dims.len()];
    for a in 1..dims.len() {
        strides[a] = strides[a - 1] * dims[a - 1];
    }

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(n * (2 * dims.len() + 1));
    let mut values = Vec::with_capacity(n * (2 * dims.len() + 1));
    row_offsets.push(0);
    let mut coord = vec![0usize; dims.len()];
    for idx in 0..n {
        let mut rem = idx;
        for a in 0..dims.len() {
            coord[a] = rem % dims[a];
            rem /= dims[a];
        }
        // Neighbours in ascending global index order: lower ones from the
        // slowest axis down, then the diagonal, then upper ones.
        for a in (0..dims.len()).rev() {
            if coord[a] > 0 {
                col_indices.push(idx - strides[a]);
                values.push(-inv_h2[a]);
            }
        }
        col_indices.push(idx);
        values.push(diag);
        for a in 0..dims.len() {
            if coord[a] + 1 < dims[a] {
                col_indices.push(idx + strides[a]);
                values.push(-inv_h2[a]);
            }
        }
        row_offsets.push(values.len());
    }
    let matrix = SparseMatrix::try_new(n, n, row_offsets, col_indices, values)?;
    Ok(SparseSystem {
        matrix: Arc::new(matrix),
        rhs: vec![1.0; n],
        symmetric: true,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum MmLayout {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum MmField {
    Real,
    Integer,
    Pattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum MmSymmetry {
    General,
    Symmetric,
}

struct MmHeader {
    layout: MmLayout,
    field: MmField,
    symmetry: MmSymmetry,
}

struct MmFile {
    n_rows: usize,
    n_cols: usize,
    symmetry: MmSymmetry,
    entries: Vec<(usize, usize, f64)>,
}

fn mm_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::MatrixMarket {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_header(path: &Path, line: &str) -> Result<MmHeader> {
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(mm_error(path, 1, "malformed header, expected `%%MatrixMarket matrix ...`"));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => MmLayout::Coordinate,
        "array" => MmLayout::Array,
        other => return Err(mm_error(path, 1, format!("unsupported format `{other}`"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "double" => MmField::Real,
        "integer" => MmField::Integer,
        "pattern" if layout == MmLayout::Coordinate => MmField::Pattern,
        other => return Err(mm_error(path, 1, format!("unsupported field `{other}`"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => MmSymmetry::General,
        "symmetric" => MmSymmetry::Symmetric,
        other => return Err(mm_error(path, 1, format!("unsupported symmetry `{other}`"))),
    };
    Ok(MmHeader {
        layout,
        field,
        symmetry,
    })
}

fn parse_number<T: std::str::FromStr>(path: &Path, line: usize, tok: Option<&str>) -> Result<T> {
    let tok = tok.ok_or_else(|| mm_error(path, line, "missing field"))?;
    tok.parse::<T>()
        .map_err(|_| mm_error(path, line, format!("cannot parse `{tok}`")))
}

fn read_mm(path: &Path) -> Result<MmFile> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines
        .next()
        .ok_or_else(|| mm_error(path, 1, "malformed header: empty file"))?;
    let header = parse_header(path, first)?;
    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = data
        .next()
        .ok_or_else(|| mm_error(path, 2, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let n_rows: usize = parse_number(path, size_line, toks.next())?;
    let n_cols: usize = parse_number(path, size_line, toks.next())?;
    if header.symmetry == MmSymmetry::Symmetric && n_rows != n_cols {
        return Err(mm_error(path, size_line, "symmetric storage requires a square matrix"));
    }

    let mut entries = Vec::new();
    match header.layout {
        MmLayout::Coordinate => {
            let nnz: usize = parse_number(path, size_line, toks.next())?;
            entries.reserve(nnz);
            for _ in 0..nnz {
                let (ln, l) = data
                    .next()
                    .ok_or_else(|| mm_error(path, size_line, format!("expected {nnz} entries")))?;
                let mut t = l.split_whitespace();
                let i: usize = parse_number(path, ln, t.next())?;
                let j: usize = parse_number(path, ln, t.next())?;
                if i == 0 || j == 0 || i > n_rows || j > n_cols {
                    return Err(mm_error(path, ln, format!("index ({i}, {j}) out of range")));
                }
                let v = match header.field {
                    MmField::Pattern => 1.0,
                    _ => parse_number::<f64>(path, ln, t.next())?,
                };
                if header.symmetry == MmSymmetry::Symmetric && j > i {
                    return Err(mm_error(path, ln, "symmetric storage lists the lower triangle only"));
                }
                entries.push((i - 1, j - 1, v));
            }
        }
        MmLayout::Array => {
            // Column-major; symmetric storage lists the lower triangle.
            for j in 0..n_cols {
                let start = if header.symmetry == MmSymmetry::Symmetric { j } else { 0 };
                for i in start..n_rows {
                    let (ln, l) = data
                        .next()
                        .ok_or_else(|| mm_error(path, size_line, "array data ended early"))?;
                    let v: f64 = parse_number(path, ln, l.split_whitespace().next())?;
                    if v != 0.0 {
                        entries.push((i, j, v));
                    }
                }
            }
        }
    }
    if let Some((ln, _)) = data.next() {
        return Err(mm_error(path, ln, "trailing data after the declared entries"));
    }
    Ok(MmFile {
        n_rows,
        n_cols,
        symmetry: header.symmetry,
        entries,
    })
}

/// Reads a square Matrix Market matrix; symmetric storage is expanded and
/// the right-hand side is all ones.
pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<SparseSystem> {
    let matrix = load_matrix(path.as_ref())?;
    let n = matrix.n_rows();
    SparseSystem::new(matrix, vec![1.0; n])
}

/// Like [`load_matrix_market`] with the right-hand side read from an
/// `n x 1` Matrix Market array (or coordinate) file.
pub fn load_matrix_market_with_rhs(
    path: impl AsRef<Path>,
    rhs_path: impl AsRef<Path>,
) -> Result<SparseSystem> {
    let matrix = load_matrix(path.as_ref())?;
    let rhs_path = rhs_path.as_ref();
    let v = read_mm(rhs_path)?;
    if v.n_cols != 1 || v.n_rows != matrix.n_rows() {
        return Err(mm_error(
            rhs_path,
            2,
            format!("rhs must be {}x1, got {}x{}", matrix.n_rows(), v.n_rows, v.n_cols),
        ));
    }
    let mut rhs = vec![0.0; v.n_rows];
    for (i, _, x) in v.entries {
        rhs[i] += x;
    }
    SparseSystem::new(matrix, rhs)
}

fn load_matrix(path: &Path) -> Result<SparseMatrix> {
    let mm = read_mm(path)?;
    if mm.n_rows != mm.n_cols {
        return Err(Error::InvalidMatrix(format!(
            "{}: matrix is {}x{}, expected square",
            path.display(),
            mm.n_rows,
            mm.n_cols
        )));
    }
    let mut triplets = Vec::with_capacity(mm.entries.len() * 2);
    for &(i, j, v) in &mm.entries {
        triplets.push((i, j, v));
        if mm.symmetry == MmSymmetry::Symmetric && i != j {
            triplets.push((j, i, v));
        }
    }
    SparseMatrix::from_triplets(mm.n_rows, mm.n_cols, &triplets)
}

/// Writes `matrix` in coordinate general format.
pub fn write_matrix_market(path: impl AsRef<Path>, matrix: &SparseMatrix) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", matrix.n_rows(), matrix.n_cols(), matrix.nnz());
    for i in 0..matrix.n_rows() {
        let (cols, vals) = matrix.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
        }
    }
    fs::write(path, out)?;
    Ok(())
}
