//! Thin wrapper over `matrixmultiply::dgemm` with explicit transposes.

/// `c = beta * c + op(a) * op(b)` where `op(a)` is `m x k` and `op(b)` is
/// `k x n`. All matrices are row-major; `trans_a` / `trans_b` read the stored
/// matrix transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let lda = if trans_a { m } else { k };
    let ldb = if trans_b { k } else { n };
    gemm_ld(m, k, n, a, lda, trans_a, b, ldb, trans_b, beta, c, n);
}

/// [`gemm`] on sub-matrices: `lda`, `ldb`, `ldc` are the row strides of the
/// stored matrices.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_ld(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    lda: usize,
    trans_a: bool,
    b: &[f64],
    ldb: usize,
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
    ldc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    let extent = |rows: usize, cols: usize, ld: usize| if rows == 0 || cols == 0 { 0 } else { (rows - 1) * ld + cols };
    let (ar, ac) = if trans_a { (k, m) } else { (m, k) };
    let (br, bc) = if trans_b { (n, k) } else { (k, n) };
    assert!(ac <= lda && a.len() >= extent(ar, ac, lda));
    assert!(bc <= ldb && b.len() >= extent(br, bc, ldb));
    assert!(n <= ldc && c.len() >= extent(m, n, ldc));
    let (rsa, csa) = if trans_a { (1, lda as isize) } else { (lda as isize, 1) };
    let (rsb, csb) = if trans_b { (1, ldb as isize) } else { (ldb as isize, 1) };
    // SAFETY: the asserts above keep every strided access inside `a`, `b`
    // and `c`, and `c` is a unique borrow so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}
