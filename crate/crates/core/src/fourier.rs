//! Walsh-Hadamard transform over `{±1}^k` truth tables.

/// In-place unnormalized fast Walsh-Hadamard transform. Length must be a power of two.
pub fn fwht(values: &mut [f64]) {
    let n = values.len();
    assert!(n.is_power_of_two(), "fwht length must be a power of two");
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (values[i], values[i + h]);
                values[i] = a + b;
                values[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Fourier coefficients `ĥ(S) = E_s[h(s) Π_{j∈S} s_j]` indexed by subset mask.
///
/// Table index bit `j` set means `s_j = +1`. The transform is taken over
/// the mask convention where set bit means `-1`, so the table is reversed first.
pub fn fourier_coefficients(table: &[f64]) -> Vec<f64> {
    let len = table.len();
    let mut v: Vec<f64> = (0..len).map(|idx| table[(len - 1) ^ idx]).collect();
    fwht(&mut v);
    let scale = 1.0 / len as f64;
    v.iter_mut().for_each(|x| *x *= scale);
    v
}

/// Evaluate `Σ_S ĥ(S) Π_{j∈S} s_j` at a sign vector.
pub fn evaluate_expansion(coeffs: &[f64], s: &[i8]) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(mask, c)| {
            let parity: i32 = (0..s.len())
                .filter(|j| (mask >> j) & 1 == 1)
                .map(|j| s[j] as i32)
                .product();
            c * parity as f64
        })
        .sum()
}
