//! Image assignment: walk an event's links in order and take the
//! alphabetically first non-standard image of the first linked article that
//! has one.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::extract::{Event, ImageRef};
use crate::ingest::{ImageSource, SourceError, DEFAULT_THUMB_WIDTH};
use crate::profile::LanguageProfile;

/// Memoizes image listings and thumbnail URLs for one run. Entries are never
/// invalidated; errors are not cached.
#[derive(Debug, Default)]
pub struct ImageCache {
    images: Mutex<HashMap<String, Vec<String>>>,
    thumbs: Mutex<HashMap<(String, u32), String>>,
}

impl ImageCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn images(&self, source: &dyn ImageSource, title: &str) -> Result<Vec<String>, SourceError> {
        if let Some(hit) = self.images.lock().unwrap_or_else(|e| e.into_inner()).get(title) {
            return Ok(hit.clone());
        }
        let listed = source.list_images(title)?;
        let mut map = self.images.lock().unwrap_or_else(|e| e.into_inner());
        Ok(map.entry(title.to_string()).or_insert(listed).clone())
    }

    pub fn thumb(&self, source: &dyn ImageSource, file: &str, width: u32) -> Result<String, SourceError> {
        let key = (file.to_string(), width);
        if let Some(hit) = self.thumbs.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(hit.clone());
        }
        let url = source.image_thumb_url(file, width)?;
        let mut map = self.thumbs.lock().unwrap_or_else(|e| e.into_inner());
        Ok(map.entry(key).or_insert(url).clone())
    }
}

pub fn is_standard_image(file_title: &str, blocklist: &[String]) -> bool {
    let lower = file_title.to_lowercase();
    blocklist.iter().any(|b| lower.contains(&b.to_lowercase()))
}

/// Picks the first content image for the event, or leaves it without one.
/// A link whose lookup fails is skipped.
pub fn assign_image(mut event: Event, source: &dyn ImageSource, cache: &ImageCache, profile: &LanguageProfile) -> Event {
    event.image = find_image(&event, source, cache, profile.image_blocklist(), DEFAULT_THUMB_WIDTH);
    event
}

pub fn find_image(
    event: &Event,
    source: &dyn ImageSource,
    cache: &ImageCache,
    blocklist: &[String],
    width_px: u32,
) -> Option<ImageRef> {
    for link in &event.links {
        let images = match cache.images(source, &link.target) {
            Ok(images) => images,
            Err(e) => {
                log::debug!("images of {:?}: {e}", link.target);
                continue;
            }
        };
        let Some(file) = images.iter().find(|f| !is_standard_image(f, blocklist)) else {
            continue;
        };
        match cache.thumb(source, file, width_px) {
            Ok(thumb_url) => return Some(ImageRef { file_title: file.clone(), thumb_url, width_px }),
            Err(e) => log::debug!("thumbnail of {file:?}: {e}"),
        }
    }
    None
}
