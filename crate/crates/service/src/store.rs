//! In-memory state of the service with optional write-through persistence.
//!
//! With a data directory every document lives in
//! `domain/`, `items/`, `learners/` and `sessions/` as canonical JSON, one
//! file per id, and is rewritten after each mutation.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use compass_core::storage::{
    load_domain_model, load_individual, load_item_pool, load_session, save_domain_model, save_individual,
    save_item_pool, save_session,
};
use compass_core::{DomainModel, IndividualModel, ItemPool, SessionState};

#[derive(Debug, Default)]
pub struct Store {
    dir: Option<PathBuf>,
    pub domains: BTreeMap<String, DomainModel>,
    pub pools: BTreeMap<String, ItemPool>,
    pub learners: BTreeMap<String, IndividualModel>,
    pub sessions: BTreeMap<String, SessionState>,
    next_session: u64,
}

#[derive(Debug)]
pub enum OpenError {
    Io(PathBuf, io::Error),
    Document(PathBuf, compass_core::Error),
}

impl std::fmt::Display for OpenError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OpenError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            OpenError::Document(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl std::error::Error for OpenError {}

const KINDS: [&str; 4] = ["domain", "items", "learners", "sessions"];

fn read_all<T>(
    dir: &Path,
    load: fn(&[u8]) -> compass_core::Result<compass_core::storage::Loaded<T>>,
    key: fn(&T) -> &str,
) -> Result<BTreeMap<String, T>, OpenError> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| OpenError::Io(dir.to_owned(), e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let bytes = fs::read(&path).map_err(|e| OpenError::Io(path.clone(), e))?;
        let loaded = load(&bytes).map_err(|e| OpenError::Document(path.clone(), e))?;
        for w in &loaded.warnings {
            tracing::warn!(path = %path.display(), code = %w.code, "{}", w.message);
        }
        out.insert(key(&loaded.value).to_owned(), loaded.value);
    }
    Ok(out)
}

impl Store {
    pub fn in_memory() -> Self {
        Store::default()
    }

    /// Opens (and creates if needed) a data directory, loading every stored
    /// document.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, OpenError> {
        let dir = dir.into();
        for kind in KINDS {
            let sub = dir.join(kind);
            fs::create_dir_all(&sub).map_err(|e| OpenError::Io(sub, e))?;
        }
        let sessions = read_all(&dir.join("sessions"), load_session, |s| &s.session_id)?;
        let next_session = sessions.keys().filter_map(|id| id.strip_prefix("s-")?.parse::<u64>().ok()).max().unwrap_or(0);
        Ok(Store {
            domains: read_all(&dir.join("domain"), load_domain_model, |m| &m.module_id)?,
            pools: read_all(&dir.join("items"), load_item_pool, |p| &p.pool_id)?,
            learners: read_all(&dir.join("learners"), load_individual, |l| &l.learner_id)?,
            sessions,
            next_session,
            dir: Some(dir),
        })
    }

    fn write(&self, kind: &str, id: &str, bytes: &[u8]) -> io::Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let target = dir.join(kind).join(format!("{id}.json"));
        let tmp = dir.join(kind).join(format!(".{id}.json.tmp"));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &target)
    }

    pub fn put_domain(&mut self, model: DomainModel) -> io::Result<()> {
        self.write("domain", &model.module_id, &save_domain_model(&model))?;
        self.domains.insert(model.module_id.clone(), model);
        Ok(())
    }

    pub fn put_pool(&mut self, pool: ItemPool) -> io::Result<()> {
        self.write("items", &pool.pool_id, &save_item_pool(&pool))?;
        self.pools.insert(pool.pool_id.clone(), pool);
        Ok(())
    }

    pub fn put_learner(&mut self, learner: IndividualModel) -> io::Result<()> {
        self.write("learners", &learner.learner_id, &save_individual(&learner))?;
        self.learners.insert(learner.learner_id.clone(), learner);
        Ok(())
    }

    pub fn put_session(&mut self, session: SessionState) -> io::Result<()> {
        self.write("sessions", &session.session_id, &save_session(&session))?;
        self.sessions.insert(session.session_id.clone(), session);
        Ok(())
    }

    /// Learners are created implicitly; an unknown id is an empty log.
    pub fn learner(&self, id: &str) -> IndividualModel {
        self.learners.get(id).cloned().unwrap_or_else(|| IndividualModel::new(id))
    }

    pub fn allocate_session_id(&mut self) -> String {
        self.next_session += 1;
        format!("s-{:06}", self.next_session)
    }
}
