//! Coordinate changes that bring far-away roots into a bounded box.

use crate::funcsys::poly::Poly;
use crate::funcsys::{Expr, FuncSystem, SystemError};

/// Substitutes `x_i -> 1/x_i` for every flagged `i`. Polynomial equations
/// are multiplied by the power of each flagged variable that clears the
/// denominators; other equations keep the rational form and add a warning.
pub fn invert_coordinates(f: &FuncSystem, flags: &[bool]) -> Result<(FuncSystem, Vec<String>), SystemError> {
    let n = f.dim_checked(flags.len())?;
    let mut warnings = Vec::new();
    let exprs = f
        .exprs()
        .iter()
        .enumerate()
        .map(|(i, e)| match Poly::from_expr(e, n) {
            Some(p) => p.invert_vars(flags).to_expr(),
            None => {
                warnings.push(format!(
                    "equation {} is not polynomial; inverted variables stay in denominators",
                    i + 1
                ));
                e.map_vars(&|j| flags[j].then(|| Expr::div(Expr::one(), Expr::var(j))))
            }
        })
        .collect();
    Ok((FuncSystem::new(f.names().to_vec(), exprs)?, warnings))
}

/// Substitutes `x_i -> c_i x_i`, so a root `r` of `f` becomes `r_i / c_i`.
pub fn scale_coordinates(f: &FuncSystem, c: &[f64]) -> Result<FuncSystem, SystemError> {
    let n = f.dim_checked(c.len())?;
    let exprs = f
        .exprs()
        .iter()
        .map(|e| match Poly::from_expr(e, n) {
            Some(p) => p.scale_vars(c).to_expr(),
            None => e.map_vars(&|j| Some(Expr::mul(Expr::constant(c[j]), Expr::var(j)))),
        })
        .collect();
    FuncSystem::new(f.names().to_vec(), exprs)
}
