fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let out = std::path::Path::new(&crate_dir).join("include").join("trfuse.h");
    std::fs::create_dir_all(out.parent().unwrap()).unwrap();
    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("TRFUSE_H".into()),
        cpp_compat: true,
        enumeration: cbindgen::EnumConfig {
            prefix_with_name: true,
            ..Default::default()
        },
        ..Default::default()
    };
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("cbindgen header generation")
        .write_to_file(out);
    println!("cargo:rerun-if-changed=src/lib.rs");
}
