//! HTTP API over the makeup library: upload, landmarks, recommendation,
//! synthesis and catalog browsing.
//!
//! Images are addressed by the SHA-256 of their PNG bytes; synthesis results
//! by the SHA-256 of (image, landmarks, resolved spec). Model and DB are
//! read-only after startup.

mod error;
mod routes;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use dashmap::DashMap;
use image::RgbImage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::net::TcpListener;
use tokio::sync::Semaphore;
use vanity_core::dataset::{load_db, MakeupDb};
use vanity_core::geometry::LandmarkSet;
use vanity_core::io::write_atomic;
use vanity_core::recommender::LatentSvmModel;
use vanity_core::synthesis::SynthesisConfig;

pub use error::{ApiError, ApiResult};
pub use routes::{router, CatalogResponse, ColorRef, ExplicitSpec, SynthesizeRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub model: PathBuf,
    pub db: PathBuf,
    /// Landmark provider that accepts a PNG body and answers with a landmark document.
    pub provider_url: Option<String>,
    pub provider_timeout_secs: u64,
    /// Concurrent synthesis jobs; further requests wait in FIFO order.
    pub workers: usize,
    pub max_upload_bytes: usize,
    /// When set, uploads and landmarks are also written here and reloaded at startup.
    pub persist_dir: Option<PathBuf>,
    pub synthesis: SynthesisConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            model: PathBuf::from("model.txt"),
            db: PathBuf::from("db"),
            provider_url: None,
            provider_timeout_secs: 10,
            workers: 2,
            max_upload_bytes: 16 << 20,
            persist_dir: None,
            synthesis: SynthesisConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> vanity_core::Result<()> {
        if self.workers == 0 {
            return Err(vanity_core::Error::InvalidParameter("workers must be >= 1".into()));
        }
        if self.max_upload_bytes == 0 {
            return Err(vanity_core::Error::InvalidParameter("max_upload_bytes must be >= 1".into()));
        }
        self.synthesis.validate()
    }
}

pub(crate) struct StoredImage {
    pub png: Vec<u8>,
    pub rgb: RgbImage,
}

pub(crate) struct StoredResult {
    pub image_id: String,
    pub png: Vec<u8>,
}

pub(crate) struct Inner {
    pub model: LatentSvmModel,
    pub db: MakeupDb,
    pub synthesis: SynthesisConfig,
    pub images: DashMap<String, Arc<StoredImage>>,
    pub landmarks: DashMap<String, LandmarkSet>,
    pub results: DashMap<String, Arc<StoredResult>>,
    pub workers: Semaphore,
    pub provider: Option<(reqwest::Client, String)>,
    pub persist_dir: Option<PathBuf>,
    pub max_upload_bytes: usize,
}

/// Shared handler state; cheap to clone.
#[derive(Clone)]
pub struct AppState {
    pub(crate) inner: Arc<Inner>,
}

pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl AppState {
    /// Fails with a schema mismatch when the model and DB label spaces differ.
    pub fn new(model: LatentSvmModel, db: MakeupDb, config: &ServiceConfig) -> vanity_core::Result<Self> {
        config.validate()?;
        let db_labels = db.label_space()?;
        if db_labels != model.labels {
            return Err(vanity_core::Error::SchemaMismatch(format!(
                "model labels {} vs db labels {db_labels}",
                model.labels
            )));
        }
        let provider = match &config.provider_url {
            Some(url) => {
                let client = reqwest::Client::builder()
                    .timeout(Duration::from_secs(config.provider_timeout_secs))
                    .build()
                    .map_err(|e| vanity_core::Error::InvalidParameter(format!("provider client: {e}")))?;
                Some((client, url.clone()))
            }
            None => None,
        };
        let state = Self {
            inner: Arc::new(Inner {
                model,
                db,
                synthesis: config.synthesis,
                images: DashMap::new(),
                landmarks: DashMap::new(),
                results: DashMap::new(),
                workers: Semaphore::new(config.workers),
                provider,
                persist_dir: config.persist_dir.clone(),
                max_upload_bytes: config.max_upload_bytes,
            }),
        };
        if let Some(dir) = &config.persist_dir {
            state.restore(dir)?;
        }
        Ok(state)
    }

    /// Load model and DB from the configured paths.
    pub fn load(config: &ServiceConfig) -> vanity_core::Result<Self> {
        let model = LatentSvmModel::load(&config.model)?;
        let db = load_db(&config.db)?;
        Self::new(model, db, config)
    }

    pub fn image_count(&self) -> usize {
        self.inner.images.len()
    }

    fn restore(&self, dir: &Path) -> vanity_core::Result<()> {
        let io = |p: &Path, e| vanity_core::Error::io(p, e);
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        for entry in fs::read_dir(dir).map_err(|e| io(dir, e))? {
            let path = entry.map_err(|e| io(dir, e))?.path();
            if path.extension().is_some_and(|e| e == "png") {
                let png = fs::read(&path).map_err(|e| io(&path, e))?;
                let Ok(rgb) = vanity_core::imageops::decode_png_rgb8(&png) else {
                    tracing::warn!(path = %path.display(), "skipping undecodable persisted image");
                    continue;
                };
                let id = content_id(&png);
                let pts = path.with_extension("pts");
                if pts.exists() {
                    self.inner.landmarks.insert(id.clone(), LandmarkSet::load(&pts)?);
                }
                self.inner.images.insert(id, Arc::new(StoredImage { png, rgb }));
            }
        }
        tracing::info!(images = self.inner.images.len(), "restored persisted images");
        Ok(())
    }

    pub(crate) fn persist_image(&self, id: &str, png: &[u8]) {
        if let Some(dir) = &self.inner.persist_dir {
            if let Err(e) = write_atomic(&dir.join(format!("{id}.png")), png) {
                tracing::warn!(error = %e, "failed to persist image");
            }
        }
    }

    pub(crate) fn persist_landmarks(&self, id: &str, lm: &LandmarkSet) {
        if let Some(dir) = &self.inner.persist_dir {
            if let Err(e) = lm.save(&dir.join(format!("{id}.pts"))) {
                tracing::warn!(error = %e, "failed to persist landmarks");
            }
        }
    }
}

/// Bind the listener; separate from [`serve`] so callers can report bind errors.
pub async fn bind(listen: &str) -> std::io::Result<TcpListener> {
    TcpListener::bind(listen).await
}

/// Serve until Ctrl-C.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
