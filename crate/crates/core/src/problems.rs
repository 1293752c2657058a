//! Boolean problems: integer-valued functions over `n`-bit inputs.
//!
//! Inputs are handled as row indices. Bit `j` of a row is input bit `b_j`
//! and carries weight `2^j` in binary evaluation, so row `i` of a truth
//! table is the input whose bits encode `i`. Bit strings written for
//! humans (`"110"`) list `b_{n-1}` first, as in the usual truth-table
//! layout.

use std::fmt;
use std::io;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, too_large, Error, Result};

/// Largest supported input width. Rows and binary values must fit in `i64`.
pub const MAX_BITS: usize = 62;

/// Largest `n` for which a full truth table is materialized.
pub const MAX_TABLE_BITS: usize = 20;

/// Largest `n` accepted for explicit custom tables.
pub const MAX_CUSTOM_BITS: usize = 14;

/// Serializable description of a problem, used by constructors and configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Or { n: usize },
    Ue { n: usize },
    Be { n: usize },
    Tribes { n: usize, tribes: usize },
    /// Two `k`-bit numbers `x` (bits `0..k`) and `y` (bits `k..2k`).
    Comparison { k: usize },
    /// `count` numbers of `k` bits each; number `l` occupies bits `l*k..(l+1)*k`.
    Sorting { count: usize, k: usize },
    Custom { n: usize, outputs: Vec<i64> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemKind {
    Or,
    Ue,
    Be,
    Tribes { tribes: usize },
    Comparison { k: usize },
    Sorting { count: usize, k: usize },
    Custom(Arc<[i64]>),
}

/// A total, deterministic function `f: {0,1}^n -> Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct BooleanProblem {
    n: usize,
    kind: ProblemKind,
    output_bound: i64,
}

/// Builds a problem from its descriptor, validating the parameters.
pub fn build_problem(spec: &ProblemSpec) -> Result<BooleanProblem> {
    BooleanProblem::new(spec)
}

fn check_width(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Construction("n must be at least 1".into()));
    }
    if n > MAX_BITS {
        return Err(Error::Construction(format!(
            "n = {n} exceeds the supported maximum of {MAX_BITS} bits"
        )));
    }
    Ok(())
}

impl BooleanProblem {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        let (n, kind) = match spec {
            ProblemSpec::Or { n } => (*n, ProblemKind::Or),
            ProblemSpec::Ue { n } => (*n, ProblemKind::Ue),
            ProblemSpec::Be { n } => (*n, ProblemKind::Be),
            ProblemSpec::Tribes { n, tribes } => {
                if *tribes == 0 || n % tribes != 0 {
                    return Err(Error::Construction(format!(
                        "tribe count {tribes} must be positive and divide n = {n}"
                    )));
                }
                (*n, ProblemKind::Tribes { tribes: *tribes })
            }
            ProblemSpec::Comparison { k } => {
                if *k == 0 {
                    return Err(Error::Construction("comparison needs k >= 1".into()));
                }
                (2 * k, ProblemKind::Comparison { k: *k })
            }
            ProblemSpec::Sorting { count, k } => {
                if *count == 0 || *k == 0 {
                    return Err(Error::Construction(
                        "sorting needs at least one number of at least one bit".into(),
                    ));
                }
                let n = count.checked_mul(*k).unwrap_or(usize::MAX);
                (n, ProblemKind::Sorting { count: *count, k: *k })
            }
            ProblemSpec::Custom { n, outputs } => {
                if *n > MAX_CUSTOM_BITS {
                    return Err(Error::Construction(format!(
                        "custom tables are limited to n <= {MAX_CUSTOM_BITS}"
                    )));
                }
                if *n >= 1 && outputs.len() != 1usize << n {
                    return Err(Error::Construction(format!(
                        "custom table for n = {n} needs {} outputs, got {}",
                        1usize << n,
                        outputs.len()
                    )));
                }
                (*n, ProblemKind::Custom(outputs.clone().into()))
            }
        };
        check_width(n)?;
        let output_bound = match &kind {
            ProblemKind::Or | ProblemKind::Tribes { .. } | ProblemKind::Comparison { .. } => 1,
            ProblemKind::Ue => n as i64,
            ProblemKind::Be | ProblemKind::Sorting { .. } => (1i64 << n) - 1,
            ProblemKind::Custom(table) => table.iter().map(|v| v.saturating_abs()).max().unwrap_or(0),
        };
        Ok(Self { n, kind, output_bound })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    /// Short identifier: `or`, `ue`, `be`, `tribes`, `comparison`, `sorting`, `custom`.
    pub fn name(&self) -> &'static str {
        match self.kind {
            ProblemKind::Or => "or",
            ProblemKind::Ue => "ue",
            ProblemKind::Be => "be",
            ProblemKind::Tribes { .. } => "tribes",
            ProblemKind::Comparison { .. } => "comparison",
            ProblemKind::Sorting { .. } => "sorting",
            ProblemKind::Custom(_) => "custom",
        }
    }

    /// Maximum of `|f(I)|` over all inputs.
    pub fn output_bound(&self) -> i64 {
        self.output_bound
    }

    pub fn spec(&self) -> ProblemSpec {
        let n = self.n;
        match &self.kind {
            ProblemKind::Or => ProblemSpec::Or { n },
            ProblemKind::Ue => ProblemSpec::Ue { n },
            ProblemKind::Be => ProblemSpec::Be { n },
            ProblemKind::Tribes { tribes } => ProblemSpec::Tribes { n, tribes: *tribes },
            ProblemKind::Comparison { k } => ProblemSpec::Comparison { k: *k },
            ProblemKind::Sorting { count, k } => ProblemSpec::Sorting { count: *count, k: *k },
            ProblemKind::Custom(t) => ProblemSpec::Custom { n, outputs: t.to_vec() },
        }
    }

    /// Number of input rows, `2^n`.
    pub fn rows(&self) -> u64 {
        1u64 << self.n
    }

    pub(crate) fn row_mask(&self) -> u64 {
        (1u64 << self.n) - 1
    }

    /// Evaluates `f` on the row whose bit `j` is `b_j`. Bits above `n` are ignored.
    pub fn evaluate_row(&self, row: u64) -> i64 {
        let row = row & self.row_mask();
        match &self.kind {
            ProblemKind::Or => (row != 0) as i64,
            ProblemKind::Ue => row.count_ones() as i64,
            ProblemKind::Be => row as i64,
            ProblemKind::Tribes { tribes } => {
                let size = self.n / tribes;
                let tribe_mask = (1u64 << size) - 1;
                (0..*tribes).any(|t| (row >> (t * size)) & tribe_mask == tribe_mask) as i64
            }
            ProblemKind::Comparison { k } => {
                let mask = (1u64 << k) - 1;
                let (x, y) = (row & mask, row >> k);
                match x.cmp(&y) {
                    std::cmp::Ordering::Greater => 1,
                    std::cmp::Ordering::Equal => 0,
                    std::cmp::Ordering::Less => -1,
                }
            }
            ProblemKind::Sorting { count, k } => {
                let mut values = unpack_numbers(row, *count, *k);
                values.sort_unstable();
                pack_numbers(&values, *k) as i64
            }
            ProblemKind::Custom(table) => table[row as usize],
        }
    }

    /// Evaluates `f` on a bit vector indexed by bit position (`bits[j] = b_j`).
    pub fn evaluate(&self, bits: &[bool]) -> Result<i64> {
        if bits.len() != self.n {
            return Err(invalid(format!(
                "expected {} bits, got {}",
                self.n,
                bits.len()
            )));
        }
        Ok(self.evaluate_row(row_from_bits(bits)))
    }

    /// The `k`-bit operands of a Comparison or Sorting problem, in input order.
    pub fn operands(&self, row: u64) -> Option<Vec<u64>> {
        match self.kind {
            ProblemKind::Comparison { k } => Some(unpack_numbers(row, 2, k)),
            ProblemKind::Sorting { count, k } => Some(unpack_numbers(row, count, k)),
            _ => None,
        }
    }
}

impl fmt::Display for BooleanProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ProblemKind::Tribes { tribes } => write!(f, "tribes(n={}, tribes={tribes})", self.n),
            ProblemKind::Comparison { k } => write!(f, "comparison(k={k})"),
            ProblemKind::Sorting { count, k } => write!(f, "sorting(count={count}, k={k})"),
            _ => write!(f, "{}(n={})", self.name(), self.n),
        }
    }
}

/// Splits a row into `count` numbers of `k` bits, lowest bits first.
pub fn unpack_numbers(row: u64, count: usize, k: usize) -> Vec<u64> {
    let mask = (1u64 << k) - 1;
    (0..count).map(|l| (row >> (l * k)) & mask).collect()
}

/// Inverse of [`unpack_numbers`].
pub fn pack_numbers(values: &[u64], k: usize) -> u64 {
    values
        .iter()
        .enumerate()
        .fold(0, |acc, (l, v)| acc | (v << (l * k)))
}

pub fn row_from_bits(bits: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (j, &b)| acc | ((b as u64) << j))
}

pub fn bits_of_row(row: u64, n: usize) -> Vec<bool> {
    (0..n).map(|j| (row >> j) & 1 == 1).collect()
}

/// Parses a bit string written most significant first (`"110"` is `b_2 b_1 b_0`).
pub fn parse_bit_string(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .rev()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(invalid(format!("bit strings may contain only 0 and 1, found {other:?}"))),
        })
        .collect()
}

pub fn format_bit_string(row: u64, n: usize) -> String {
    (0..n)
        .rev()
        .map(|j| if (row >> j) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Explicit truth table: `outputs[i]` is `f` of row `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthTable {
    n: usize,
    outputs: Vec<i64>,
}

/// Materializes the truth table of `problem` (`n <= 20`).
pub fn truth_table(problem: &BooleanProblem) -> Result<TruthTable> {
    if problem.n() > MAX_TABLE_BITS {
        return Err(too_large(format!(
            "truth table for n = {} exceeds the {MAX_TABLE_BITS}-bit enumeration guard",
            problem.n()
        )));
    }
    let outputs = (0..problem.rows()).map(|r| problem.evaluate_row(r)).collect();
    Ok(TruthTable { n: problem.n(), outputs })
}

impl TruthTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn outputs(&self) -> &[i64] {
        &self.outputs
    }

    pub fn output(&self, row: u64) -> i64 {
        self.outputs[row as usize]
    }

    /// `c(i, j)`: input bit `j` of row `i`.
    pub fn cell(&self, row: u64, j: usize) -> bool {
        (row >> j) & 1 == 1
    }

    /// Distinct output values in ascending order.
    pub fn output_values(&self) -> Vec<i64> {
        let mut values = self.outputs.clone();
        values.sort_unstable();
        values.dedup();
        values
    }

    /// Writes `b_{n-1},...,b_0,output` followed by one line per row in index order.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(writer);
        let mut header: Vec<String> = (0..self.n).rev().map(|j| format!("b_{j}")).collect();
        header.push("output".into());
        w.write_record(&header).map_err(csv_err)?;
        for (row, out) in self.outputs.iter().enumerate() {
            let mut record: Vec<String> = (0..self.n)
                .rev()
                .map(|j| ((row >> j) & 1).to_string())
                .collect();
            record.push(out.to_string());
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// Reads a table written by [`TruthTable::write_csv`], checking header and row order.
    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r.headers().map_err(csv_err)?.clone();
        let n = header.len().checked_sub(1).ok_or_else(|| Error::Format("empty header".into()))?;
        if n == 0 || n > MAX_TABLE_BITS {
            return Err(Error::Format(format!("unsupported bit count {n}")));
        }
        for (pos, name) in header.iter().enumerate() {
            let expected = if pos == n { "output".to_string() } else { format!("b_{}", n - 1 - pos) };
            if name != expected {
                return Err(Error::Format(format!("header column {pos} is {name:?}, expected {expected:?}")));
            }
        }
        let mut outputs = Vec::with_capacity(1 << n);
        for (index, record) in r.records().enumerate() {
            let record = record.map_err(csv_err)?;
            let mut row = 0u64;
            for (pos, field) in record.iter().take(n).enumerate() {
                match field {
                    "0" => {}
                    "1" => row |= 1 << (n - 1 - pos),
                    other => return Err(Error::Format(format!("bad bit {other:?} in line {}", index + 2))),
                }
            }
            if row != index as u64 {
                return Err(Error::Format(format!("line {} holds row {row}, expected {index}", index + 2)));
            }
            let out = record
                .get(n)
                .and_then(|s| s.parse::<i64>().ok())
                .ok_or_else(|| Error::Format(format!("bad output in line {}", index + 2)))?;
            outputs.push(out);
        }
        if outputs.len() != 1 << n {
            return Err(Error::Format(format!("expected {} rows, found {}", 1 << n, outputs.len())));
        }
        Ok(Self { n, outputs })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;

    fn p(spec: ProblemSpec) -> BooleanProblem {
        build_problem(&spec).unwrap()
    }

    fn eval_str(problem: &BooleanProblem, s: &str) -> i64 {
        problem.evaluate(&parse_bit_string(s).unwrap()).unwrap()
    }

    #[test]
    fn table_one_examples() {
        assert_eq!(eval_str(&p(ProblemSpec::Or { n: 3 }), "000"), 0);
        assert_eq!(eval_str(&p(ProblemSpec::Be { n: 3 }), "110"), 6);
        assert_eq!(eval_str(&p(ProblemSpec::Ue { n: 3 }), "111"), 3);
    }

    #[test]
    fn tribes_witnesses() {
        let tribes = p(ProblemSpec::Tribes { n: 4, tribes: 2 });
        assert_eq!(eval_str(&tribes, "0011"), 1);
        assert_eq!(eval_str(&tribes, "0101"), 0);
    }

    #[test]
    fn comparison_and_sorting_constructors() {
        let cmp = p(ProblemSpec::Comparison { k: 1 });
        // bit 0 is x, bit 1 is y
        assert_eq!(cmp.evaluate(&[true, false]).unwrap(), 1);
        assert_eq!(cmp.evaluate(&[false, false]).unwrap(), 0);
        assert_eq!(cmp.evaluate(&[false, true]).unwrap(), -1);

        let sort = p(ProblemSpec::Sorting { count: 2, k: 1 });
        let out = sort.evaluate(&[true, false]).unwrap();
        assert_eq!(unpack_numbers(out as u64, 2, 1), vec![0, 1]);
    }

    #[test]
    fn truth_tables() {
        let or = truth_table(&p(ProblemSpec::Or { n: 3 })).unwrap();
        assert_eq!(or.outputs(), &[0, 1, 1, 1, 1, 1, 1, 1]);
        let be = truth_table(&p(ProblemSpec::Be { n: 2 })).unwrap();
        assert_eq!(be.outputs(), &[0, 1, 2, 3]);
        let ue = truth_table(&p(ProblemSpec::Ue { n: 2 })).unwrap();
        // oracle: count ones of each of the four inputs
        let counted: Vec<i64> = [[0, 0], [1, 0], [0, 1], [1, 1]]
            .iter()
            .map(|b| b.iter().sum())
            .collect();
        assert_eq!(ue.outputs(), counted.as_slice());
    }

    #[test]
    fn construction_errors() {
        assert!(build_problem(&ProblemSpec::Or { n: 0 }).is_err());
        assert!(build_problem(&ProblemSpec::Tribes { n: 5, tribes: 2 }).is_err());
        assert!(build_problem(&ProblemSpec::Comparison { k: 0 }).is_err());
        assert!(build_problem(&ProblemSpec::Custom { n: 2, outputs: vec![0; 3] }).is_err());
        assert!(build_problem(&ProblemSpec::Be { n: 63 }).is_err());
        let be = p(ProblemSpec::Be { n: 21 });
        assert!(matches!(truth_table(&be), Err(Error::ResourceLimit(_))));
        assert!(matches!(be.evaluate(&[true]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn symmetric_functions_ignore_bit_order() {
        for n in 1..=8 {
            for problem in [p(ProblemSpec::Or { n }), p(ProblemSpec::Ue { n })] {
                let perms: Vec<Vec<usize>> = if n <= 5 {
                    (0..n).permutations(n).collect()
                } else {
                    // adjacent transpositions plus a rotation generate S_n
                    let mut gens: Vec<Vec<usize>> = (0..n - 1)
                        .map(|a| (0..n).map(|j| if j == a { a + 1 } else if j == a + 1 { a } else { j }).collect())
                        .collect();
                    gens.push((0..n).map(|j| (j + 1) % n).collect());
                    gens
                };
                for row in 0..problem.rows() {
                    let bits = bits_of_row(row, n);
                    for perm in &perms {
                        let moved: Vec<bool> = perm.iter().map(|&j| bits[j]).collect();
                        assert_eq!(problem.evaluate(&moved).unwrap(), problem.evaluate_row(row));
                    }
                }
            }
        }
    }

    #[test]
    fn tribes_is_not_a_symmetric_function() {
        let tribes = p(ProblemSpec::Tribes { n: 4, tribes: 2 });
        let witness = (0..tribes.rows()).cartesian_product(0..tribes.rows()).find(|&(a, b)| {
            a.count_ones() == b.count_ones() && tribes.evaluate_row(a) != tribes.evaluate_row(b)
        });
        assert!(witness.is_some());
    }

    #[test]
    fn binary_evaluation_is_positional() {
        for n in 1..=14 {
            let be = p(ProblemSpec::Be { n });
            for row in 0..be.rows() {
                let bits = bits_of_row(row, n);
                let expected: i64 = bits.iter().enumerate().map(|(j, &b)| (b as i64) << j).sum();
                assert_eq!(be.evaluate(&bits).unwrap(), expected);
            }
        }
    }

    #[test]
    fn output_bound_matches_enumeration() {
        let specs = [
            ProblemSpec::Or { n: 5 },
            ProblemSpec::Ue { n: 6 },
            ProblemSpec::Be { n: 7 },
            ProblemSpec::Tribes { n: 6, tribes: 3 },
            ProblemSpec::Comparison { k: 3 },
            ProblemSpec::Sorting { count: 3, k: 2 },
            ProblemSpec::Custom { n: 2, outputs: vec![3, -9, 0, 4] },
        ];
        for spec in specs {
            let problem = p(spec);
            let table = truth_table(&problem).unwrap();
            let max = table.outputs().iter().map(|v| v.abs()).max().unwrap();
            assert_eq!(max, problem.output_bound(), "{problem}");
        }
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let table = truth_table(&p(ProblemSpec::Be { n: 3 })).unwrap();
        let text = table.to_csv_string();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("b_2,b_1,b_0,output"));
        assert_eq!(lines.next(), Some("0,0,0,0"));
        assert_eq!(lines.nth(5), Some("1,1,0,6"));
        let back = TruthTable::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.to_csv_string(), text);
    }

    #[test]
    fn csv_rejects_misordered_rows() {
        let bad = "b_1,b_0,output\n0,0,0\n1,0,2\n0,1,1\n1,1,3\n";
        assert!(matches!(TruthTable::read_csv(bad.as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn bit_string_round_trip() {
        let bits = parse_bit_string("101").unwrap();
        assert_eq!(bits, vec![true, false, true]);
        assert_eq!(row_from_bits(&bits), 5);
        assert_eq!(format_bit_string(6, 3), "110");
        assert!(parse_bit_string("1x").is_err());
    }
}
