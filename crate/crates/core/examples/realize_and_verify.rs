//! Builds pencils for a few expressions, checks them on random instances and
//! saves one to JSON.
//!
//! ```bash
//! cargo run -p freetrace --example realize_and_verify
//! ```

use std::collections::BTreeMap;

use freetrace::dsl;
use freetrace::pencil::{self, realize, realize_unreduced, verify};

const DECLS: &str = "dim n, d; rand Z : n x d; det A, B : d x d; target I(d);";

fn main() -> freetrace::Result<()> {
    let scope = dsl::parse(DECLS)?.scope;
    let sizes = BTreeMap::from([("n".to_string(), 7), ("d".to_string(), 5)]);
    for src in ["inv(Z' * Z + I(d))", "inv(A * Z' * Z * A + I(d)) * B", "inv(Z' * Z + A) * inv(Z' * Z + B)"] {
        let e = dsl::parse_matrix(src, &scope)?;
        let full = realize_unreduced(&e)?;
        let q = realize(&e)?;
        let err = verify(&q, &e, &sizes, 1)?;
        println!("{src}\n  {} blocks before reduction, {} after, max error {err:.1e}", full.size(), q.size());
    }

    let e = dsl::parse_matrix("inv(A * Z' * Z * A + I(d))", &scope)?;
    let path = std::env::temp_dir().join("freetrace_pencil.json");
    pencil::save(&realize(&e)?, &path)?;
    let back = pencil::load(&path)?;
    println!("\nsaved to {}:\n{}", path.display(), back.latex());
    Ok(())
}
