use std::fmt::Write as _;

use crate::numerics::Tensor;

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) || s.trim() != s || s.is_empty() {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// `n x n` matrix as CSV with the character labels as header row and first
/// column.
pub fn attention_csv(matrix: &Tensor, labels: &[char]) -> String {
    let mut out = String::from("\"\"");
    let names: Vec<String> = labels.iter().map(|c| csv_field(&c.to_string())).collect();
    for name in &names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (r, name) in names.iter().enumerate() {
        out.push_str(name);
        for v in matrix.row_slice(r) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotes_awkward_labels() {
        let m = Tensor::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let csv = attention_csv(&m, &[',', 'a']);
        assert_eq!(csv, "\"\",\",\",a\n\",\",0.5,0.5\na,1,0\n");
    }
}
