//! The closed-form proximal operators on small inputs.
//!
//!     cargo run --example proximal_operators

use kronrpca::linalg::{c, CMatrix, CVector};
use kronrpca::prox::*;

fn main() -> kronrpca::Result<()> {
    for x in [c(3.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0), c(3.0, 4.0)] {
        println!("soft_threshold({x}, 1) = {}", soft_threshold(x, 1.0));
    }

    let diag = CMatrix::from_diagonal(&CVector::from_vec(vec![c(3.0, 0.0), c(0.5, 0.0)]));
    println!("svt(diag(3, 0.5), 1) =\n{}", svt(&diag, 1.0)?);

    let row = CMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), c(4.0, 0.0), c(0.3, 0.0), c(0.4, 0.0)]);
    println!("row_threshold(., 1) =\n{}", row_threshold(&row, 1.0));

    let p = HuberParams::new(1.0, 1.0)?;
    for x in [0.5, 1.5, 3.0, -3.0] {
        println!("prox_huber({x}; c = 1, a = 1) = {}", prox_huber(x, p));
    }
    let block = CMatrix::from_column_slice(2, 1, &[c(3.0, 0.0), c(4.0, 0.0)]);
    println!(
        "prox_huber_frobenius([3, 4]) = {}",
        prox_huber_frobenius(&block, p).transpose()
    );

    // The MM surrogate touches the Huber loss at the anchor and lies above it elsewhere.
    let anchor = 2.0;
    for x in [0.0, 1.0, 2.0, 4.0] {
        println!(
            "x = {x}: huber {:.3}, majorizer at {anchor} {:.3}, weight {:.3}",
            huber(x, 1.0),
            huber_majorizer(x, anchor, 1.0),
            huber_majorizer_weight(anchor, 1.0)
        );
    }
    Ok(())
}
