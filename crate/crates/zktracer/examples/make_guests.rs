//! Regenerates the shipped guest fixture binaries in `guests/` at the
//! workspace root from the builders in `zktracer::guests`.
//!
//! Run from anywhere in the workspace:
//!
//! ```text
//! cargo run --example make_guests
//! ```

use std::fs;
use std::path::PathBuf;

fn main() {
    let guests_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../guests");
    fs::create_dir_all(&guests_dir).expect("create guests directory");
    for guest in zktracer::guests::all() {
        let path = guests_dir.join(format!("{}.bin", guest.name));
        fs::write(&path, guest.image()).expect("write guest binary");
        println!(
            "wrote {} ({} words, base {:#x}, entry {:#x}, expected exit {})",
            path.display(),
            guest.words.len(),
            guest.base,
            guest.entry,
            guest.expected_exit
        );
    }
}
