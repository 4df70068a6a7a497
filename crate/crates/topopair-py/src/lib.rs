// Bindings are added once the core crate API is in place.
