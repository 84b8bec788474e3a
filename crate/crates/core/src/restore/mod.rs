//! Per-degradation restorers behind one registry. Each kind has a built-in
//! classical operator; any kind can be redirected to an external command.

mod external;
mod ops;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use external::{ExternalHook, DEFAULT_TIMEOUT};
pub use ops::{
    bilateral, dehaze, derain, enhance, estimate_airlight, unsharp, upscale, BilateralParams, DehazeParams,
    DerainParams, EnhanceParams, UnsharpParams, UpscaleParams,
};

use crate::imaging::Image;
use crate::synth::{DegradationKind, K};

/// Largest side accepted by the super-resolution restorer before upscaling.
pub const MAX_UPSCALE_SIDE: usize = 2048;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RestoreError {
    #[error("{width}x{height} exceeds the {MAX_UPSCALE_SIDE}px upscale limit")]
    OversizeForUpscale { width: usize, height: usize },
    #[error("command template must contain {{in}} and {{out}}: {0:?}")]
    TemplateInvalid(String),
    #[error("restorer failed: {0}")]
    Failed(String),
}

/// Parameter blocks, keyed in config as `restorers.<kind>.<field>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RestorerParams {
    pub denoising: BilateralParams,
    #[serde(deserialize_with = "indoor_dehaze")]
    pub dehazing_indoor: DehazeParams,
    pub dehazing_outdoor: DehazeParams,
    pub deblurring: UnsharpParams,
    pub deraining: DerainParams,
    pub enhancement: EnhanceParams,
    pub super_resolution: UpscaleParams,
}

impl Default for RestorerParams {
    fn default() -> Self {
        Self {
            denoising: BilateralParams::default(),
            dehazing_indoor: DehazeParams::indoor(),
            dehazing_outdoor: DehazeParams::outdoor(),
            deblurring: UnsharpParams::default(),
            deraining: DerainParams::default(),
            enhancement: EnhanceParams::default(),
            super_resolution: UpscaleParams::default(),
        }
    }
}

#[derive(Deserialize)]
struct DehazeOverrides {
    window: Option<usize>,
    omega: Option<f64>,
    t_min: Option<f64>,
    airlight: Option<f64>,
    airlight_fraction: Option<f64>,
}

// Missing indoor fields fall back to the indoor defaults, not the outdoor ones.
fn indoor_dehaze<'de, D: serde::Deserializer<'de>>(d: D) -> Result<DehazeParams, D::Error> {
    let o = DehazeOverrides::deserialize(d)?;
    let base = DehazeParams::indoor();
    Ok(DehazeParams {
        window: o.window.unwrap_or(base.window),
        omega: o.omega.unwrap_or(base.omega),
        t_min: o.t_min.unwrap_or(base.t_min),
        airlight: o.airlight.or(base.airlight),
        airlight_fraction: o.airlight_fraction.unwrap_or(base.airlight_fraction),
    })
}

/// Anything that maps a degraded image to a restored one per kind.
pub trait Restorer: Sync {
    fn restore(&self, kind: DegradationKind, image: &Image) -> Result<Image, RestoreError>;

    /// Like [`Restorer::restore`], also returning a warning when a fallback
    /// path was taken.
    fn restore_with_warning(
        &self,
        kind: DegradationKind,
        image: &Image,
    ) -> Result<(Image, Option<String>), RestoreError> {
        self.restore(kind, image).map(|img| (img, None))
    }
}

impl<F> Restorer for F
where
    F: Fn(DegradationKind, &Image) -> Result<Image, RestoreError> + Sync,
{
    fn restore(&self, kind: DegradationKind, image: &Image) -> Result<Image, RestoreError> {
        self(kind, image)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RestorerRegistry {
    pub params: RestorerParams,
    external: [Option<ExternalHook>; K],
}

impl RestorerRegistry {
    pub fn new(params: RestorerParams) -> Self {
        Self { params, external: Default::default() }
    }

    /// Routes `kind` through `template` with the default 10 s timeout.
    pub fn set_external(self, kind: DegradationKind, template: &str) -> Result<Self, RestoreError> {
        self.set_external_with_timeout(kind, template, DEFAULT_TIMEOUT)
    }

    pub fn set_external_with_timeout(
        mut self,
        kind: DegradationKind,
        template: &str,
        timeout: Duration,
    ) -> Result<Self, RestoreError> {
        self.external[kind.index()] = Some(ExternalHook::new(template, timeout)?);
        Ok(self)
    }

    pub fn external(&self, kind: DegradationKind) -> Option<&ExternalHook> {
        self.external[kind.index()].as_ref()
    }

    /// The built-in operator for `kind`, ignoring any external hook.
    pub fn builtin(&self, kind: DegradationKind, image: &Image) -> Result<Image, RestoreError> {
        let p = &self.params;
        Ok(match kind {
            DegradationKind::Denoising => bilateral(image, &p.denoising),
            DegradationKind::DehazingIndoor => dehaze(image, &p.dehazing_indoor),
            DegradationKind::DehazingOutdoor => dehaze(image, &p.dehazing_outdoor),
            DegradationKind::Deblurring => unsharp(image, &p.deblurring),
            DegradationKind::Deraining => derain(image, &p.deraining),
            DegradationKind::Enhancement => enhance(image, &p.enhancement),
            DegradationKind::SuperResolution => {
                let (width, height) = image.dims();
                if width > MAX_UPSCALE_SIDE || height > MAX_UPSCALE_SIDE {
                    return Err(RestoreError::OversizeForUpscale { width, height });
                }
                upscale(image, &p.super_resolution)
            }
        })
    }

    /// Restores and reports a warning when an external hook failed and the
    /// built-in operator was used instead.
    pub fn restore_reporting(
        &self,
        kind: DegradationKind,
        image: &Image,
    ) -> Result<(Image, Option<String>), RestoreError> {
        if let Some(hook) = self.external(kind) {
            match hook.run(image) {
                Ok(out) => return Ok((out, None)),
                Err(msg) => {
                    let warning = format!("{kind} hook failed, using built-in: {msg}");
                    log::warn!("{warning}");
                    return Ok((self.builtin(kind, image)?, Some(warning)));
                }
            }
        }
        Ok((self.builtin(kind, image)?, None))
    }
}

impl Restorer for RestorerRegistry {
    fn restore(&self, kind: DegradationKind, image: &Image) -> Result<Image, RestoreError> {
        self.restore_reporting(kind, image).map(|(img, _)| img)
    }

    fn restore_with_warning(
        &self,
        kind: DegradationKind,
        image: &Image,
    ) -> Result<(Image, Option<String>), RestoreError> {
        self.restore_reporting(kind, image)
    }
}

pub fn restore(kind: DegradationKind, image: &Image, registry: &RestorerRegistry) -> Result<Image, RestoreError> {
    registry.restore(kind, image)
}
