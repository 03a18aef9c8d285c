use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub fn demo_version() -> String {
    "0.1.0".to_string()
}
