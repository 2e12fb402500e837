//! WebAssembly bindings for the browser demo in `www/`.

pub mod demo;

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    use crate::demo;

    fn js(e: impl std::fmt::Display) -> JsError {
        JsError::new(&e.to_string())
    }

    fn json(value: &impl serde::Serialize) -> Result<String, JsError> {
        serde_json::to_string(value).map_err(js)
    }

    /// Prior and posterior densities as JSON.
    #[wasm_bindgen]
    pub fn beta_posterior(
        alpha: f64,
        beta: f64,
        detections: f64,
        misses: f64,
        points: usize,
    ) -> Result<String, JsError> {
        json(&demo::beta_posterior(alpha, beta, detections, misses, points).map_err(js)?)
    }

    /// Cells crossed by a ray, as JSON.
    #[wasm_bindgen]
    pub fn ray_cells(
        width: usize,
        height: usize,
        cell_size: f64,
        x: f64,
        y: f64,
        angle: f64,
        range: f64,
    ) -> Result<String, JsError> {
        json(&demo::ray_cells(width, height, cell_size, [x, y], angle, range).map_err(js)?)
    }

    #[wasm_bindgen]
    pub struct ScenarioRun(demo::ScenarioRun);

    #[wasm_bindgen]
    impl ScenarioRun {
        #[wasm_bindgen(constructor)]
        pub fn new(cooperative: bool, seed: u32, cell_size: f64) -> Result<ScenarioRun, JsError> {
            demo::ScenarioRun::new(cooperative, seed.into(), cell_size)
                .map(ScenarioRun)
                .map_err(js)
        }

        pub fn grid(&self) -> Result<String, JsError> {
            json(&self.0.grid())
        }

        /// Advances one epoch and returns its risk row as JSON, or `undefined` at the end.
        pub fn step(&mut self) -> Result<Option<String>, JsError> {
            match self.0.step().map_err(js)? {
                Some(row) => json(&row).map(Some),
                None => Ok(None),
            }
        }

        pub fn occupancy(&self) -> Vec<f32> {
            self.0.occupancy()
        }

        pub fn outlines(&self) -> Result<String, JsError> {
            json(&self.0.outlines().map_err(js)?)
        }
    }
}
