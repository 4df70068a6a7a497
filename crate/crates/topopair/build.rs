fn main() {
    // Dense eigensolves and matrix products go through the system LAPACKE/CBLAS
    // (Debian: liblapacke-dev + libopenblas-dev).
    println!("cargo:rustc-link-lib=dylib=lapacke");
    println!("cargo:rustc-link-lib=dylib=openblas");
}
