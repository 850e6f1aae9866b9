//! Binary matrix files and run manifests.
//!
//!     cargo run --example matrix_io

use kronrpca::linalg::{c, CMatrix};
use kronrpca::manifest::{sha256_hex, Manifest};
use kronrpca::matrix_file::{decode, encode, read_matrix, write_matrix};

fn main() -> kronrpca::Result<()> {
    let dir = std::env::temp_dir().join("kronrpca-matrix-io");
    std::fs::create_dir_all(&dir)?;

    let a = CMatrix::from_fn(4, 3, |i, j| c(i as f64 + 0.25, -(j as f64) * 1e-300));
    let bytes = encode(&a);
    println!(
        "4x3 complex matrix encodes to {} bytes, sha256 {}",
        bytes.len(),
        &sha256_hex(&bytes)[..16]
    );
    assert_eq!(decode(&bytes)?, a);

    write_matrix(&dir.join("a.twrm"), &a)?;
    let back = read_matrix(&dir.join("a.twrm"))?;
    println!("round trip bit-exact: {}", back == a);

    // The header carries a checksum; a damaged shape field is caught.
    let mut corrupted = bytes.clone();
    corrupted[12] ^= 1;
    println!("flipped header bit: {}", decode(&corrupted).unwrap_err());

    let mut manifest = Manifest::new("example", 42, b"config bytes");
    manifest.add_file("a", &dir, "a.twrm")?;
    manifest.set_debug("note", "matrix_io example")?;
    manifest.write(&dir.join("manifest.json"))?;
    println!("{}", manifest.to_json()?);
    let mismatched = Manifest::read(&dir.join("manifest.json"))?.verify(&dir)?;
    println!("files not matching their hash: {mismatched:?}");
    Ok(())
}
