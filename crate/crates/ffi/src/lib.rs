//! C interface to the histevents library.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns an [`HeStatus`];
//! on failure [`he_last_error`] describes the most recent error on the
//! calling thread. Strings returned through `char **` out-parameters are
//! UTF-8, NUL-terminated and must be released with [`he_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use histevents::export::{render, ExportOptions, Format, LodeMapping};
use histevents::extract::{extract_text, PageInfo};
use histevents::profile::{bundled_profiles, load_profiles};
use histevents::service::ApiRequest;
use histevents::{Event, EventStore, Profiles};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Extract = 4,
    Store = 5,
    Query = 6,
    Json = 7,
    Panic = 8,
}

/// Loaded language profiles.
pub struct HeProfiles {
    profiles: Profiles,
}

/// An open event store.
pub struct HeStore {
    store: EventStore,
    mapping: LodeMapping,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

type FfiResult<T> = Result<T, (HeStatus, String)>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> HeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HeStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HeStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err((HeStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (HeStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| (HeStatus::NullArgument, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| (HeStatus::NullArgument, format!("{name} is null")))
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', "")).unwrap_or_default().into_raw()
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn he_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn he_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads the profiles compiled into the library.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn he_profiles_bundled(out: *mut *mut HeProfiles) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(HeProfiles { profiles: bundled_profiles() }));
        Ok(())
    })
}

/// Parses profiles from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn he_profiles_load(toml: *const c_char, out: *mut *mut HeProfiles) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let profiles = load_profiles(str_arg(toml, "toml")?).map_err(|e| (HeStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(HeProfiles { profiles }));
        Ok(())
    })
}

/// # Safety
/// `p` must come from a profiles constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn he_profiles_free(p: *mut HeProfiles) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of languages in the profile set; 0 for null.
///
/// # Safety
/// `p` must be null or a live profiles handle.
#[no_mangle]
pub unsafe extern "C" fn he_profiles_count(p: *const HeProfiles) -> usize {
    p.as_ref().map_or(0, |p| p.profiles.len())
}

fn profile<'a>(p: &'a HeProfiles, lang: &str) -> FfiResult<&'a histevents::LanguageProfile> {
    p.profiles
        .get(lang)
        .ok_or_else(|| (HeStatus::Config, format!("no profile for language {lang}")))
}

/// Article title of `year` (negative for BCE) in `lang`.
///
/// # Safety
/// Pointers must be valid; `lang` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn he_year_title(
    profiles: *const HeProfiles,
    lang: *const c_char,
    year: i32,
    out: *mut *mut c_char,
) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let p = profile(ref_arg(profiles, "profiles")?, str_arg(lang, "lang")?)?;
        *out = to_c(p.year_title(year).map_err(|e| (HeStatus::Config, e.to_string()))?);
        Ok(())
    })
}

/// Extracts the events of one year article. Writes a JSON object
/// `{"events": [...], "report": {...}}`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn he_extract_page(
    profiles: *const HeProfiles,
    lang: *const c_char,
    title: *const c_char,
    wikitext: *const c_char,
    out_json: *mut *mut c_char,
) -> HeStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        *out = ptr::null_mut();
        let lang = str_arg(lang, "lang")?;
        let title = str_arg(title, "title")?;
        let p = profile(ref_arg(profiles, "profiles")?, lang)?;
        let year = p
            .parse_year_title(title)
            .ok_or_else(|| (HeStatus::Extract, format!("{title:?} is not a year article title in {lang}")))?;
        let info = PageInfo { lang: lang.into(), title: title.into(), year };
        let (events, report) = extract_text(str_arg(wikitext, "wikitext")?, &info, p);
        let doc = serde_json::json!({ "events": events, "report": report });
        *out = to_c(doc.to_string());
        Ok(())
    })
}

/// Opens or creates a store file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn he_store_open(path: *const c_char, out: *mut *mut HeStore) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let store = EventStore::open(str_arg(path, "path")?).map_err(|e| (HeStatus::Store, e.to_string()))?;
        *out = Box::into_raw(Box::new(HeStore { store, mapping: LodeMapping::bundled() }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`he_store_open`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn he_store_free(s: *mut HeStore) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of stored events; 0 for null.
///
/// # Safety
/// `s` must be null or a live store handle.
#[no_mangle]
pub unsafe extern "C" fn he_store_count(s: *const HeStore) -> usize {
    s.as_ref().map_or(0, |s| s.store.len())
}

/// Inserts or replaces events given as a JSON array, or as the object
/// written by [`he_extract_page`]. `inserted` and `replaced` may be null.
///
/// # Safety
/// `s` must be a live store; `json` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn he_store_upsert(
    s: *mut HeStore,
    json: *const c_char,
    inserted: *mut usize,
    replaced: *mut usize,
) -> HeStatus {
    guard(|| {
        let s = out_arg(s, "store")?;
        let value: serde_json::Value =
            serde_json::from_str(str_arg(json, "json")?).map_err(|e| (HeStatus::Json, e.to_string()))?;
        let list = match value {
            serde_json::Value::Object(mut o) => o.remove("events").unwrap_or_default(),
            v => v,
        };
        let events: Vec<Event> = serde_json::from_value(list).map_err(|e| (HeStatus::Json, e.to_string()))?;
        let (i, r) = s.store.upsert_events(&events).map_err(|e| (HeStatus::Store, e.to_string()))?;
        if let Some(p) = inserted.as_mut() {
            *p = i;
        }
        if let Some(p) = replaced.as_mut() {
            *p = r;
        }
        Ok(())
    })
}

/// Runs a search given as a URL query string with the parameters of the
/// HTTP API, e.g. `begin_date=19450000&end_date=19501231&format=json`.
/// `profiles` resolves localized category names and may be null.
///
/// # Safety
/// `s` must be a live store; `query` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn he_store_search(
    s: *const HeStore,
    profiles: *const HeProfiles,
    query: *const c_char,
    out: *mut *mut c_char,
) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = ref_arg(s, "store")?;
        let params = form_urlencoded::parse(str_arg(query, "query")?.trim_start_matches('?').as_bytes())
            .into_owned()
            .collect();
        let empty = Profiles::new();
        let profiles = profiles.as_ref().map_or(&empty, |p| &p.profiles);
        let req = ApiRequest::parse(&params, profiles)
            .map_err(|e| (HeStatus::Query, format!("{}: {}", e.parameter, e.message)))?;
        let events = s.store.query(&req.query);
        *out = to_c(render(&events, req.format, req.options, &s.mapping));
        Ok(())
    })
}

/// Renders every stored event as `xml`, `json` or `n3`.
///
/// # Safety
/// `s` must be a live store; `format` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn he_store_export(
    s: *const HeStore,
    format: *const c_char,
    links: bool,
    html: bool,
    out: *mut *mut c_char,
) -> HeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = ref_arg(s, "store")?;
        let format: Format = str_arg(format, "format")?
            .parse()
            .map_err(|e: histevents::export::UnknownFormat| (HeStatus::Query, e.to_string()))?;
        *out = to_c(render(&s.store.events(), format, ExportOptions { links, html }, &s.mapping));
        Ok(())
    })
}
