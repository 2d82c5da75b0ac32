//! Session registry: creation, lookup, answers and persistence, independent
//! of the transport.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use ide_core::ea::Algorithm;

use crate::error::{Result, SessionError};
use crate::protocol::{
    AnswerRecord, CreateSessionRequest, EvalQuery, ReplayFile, SessionHeader, SessionListing,
    SessionSnapshot, SubmitRequest, SubmitResponse, REPLAY_FORMAT, REPLAY_VERSION,
};
use crate::session::{validate_params, Session};
use crate::store::{valid_id, Store};

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn lock(m: &Mutex<Session>) -> MutexGuard<'_, Session> {
    // a session is only replaced wholesale, so a poisoned lock still holds a
    // consistent value
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// All sessions, each behind its own lock so that mutations of one session
/// are serialized while distinct sessions proceed independently.
pub struct Service {
    store: Store,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
}

impl Service {
    /// Opens the store and replays every session found in it. Logs that fail
    /// to load are reported as warnings.
    pub fn open(store: Store) -> Result<(Self, Vec<String>)> {
        let (stored, mut warnings) = store.load_all()?;
        let mut sessions = BTreeMap::new();
        for s in stored {
            let id = s.header.id.clone();
            match Session::replay(s.header, &s.answers) {
                Ok(session) => {
                    sessions.insert(id, Arc::new(Mutex::new(session)));
                }
                Err(e) => warnings.push(format!("session {id} not restored: {e}")),
            }
        }
        Ok((Self { store, sessions: RwLock::new(sessions) }, warnings))
    }

    pub fn in_memory() -> Self {
        Self { store: Store::memory(), sessions: RwLock::new(BTreeMap::new()) }
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(format!("no session {id}")))
    }

    fn insert(&self, session: Session) -> Result<SessionSnapshot> {
        let id = session.header().id.clone();
        let mut map = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        if map.contains_key(&id) {
            return Err(SessionError::Conflict(format!("session {id} already exists")));
        }
        self.store.create(session.header(), session.answers())?;
        let snapshot = session.snapshot();
        map.insert(id, Arc::new(Mutex::new(session)));
        Ok(snapshot)
    }

    pub fn create(&self, request: CreateSessionRequest) -> Result<SessionSnapshot> {
        let algorithm: Algorithm = request
            .algorithm
            .parse()
            .map_err(|e: ide_core::CoreError| SessionError::validation(e.to_string(), "algorithm"))?;
        let config = validate_params(algorithm, &request.params)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let seed = request.seed.unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0);
        let header = SessionHeader {
            id,
            algorithm,
            config,
            phenotype_spec: request.phenotype_spec,
            seed,
            created_at_ms: now_ms(),
        };
        self.insert(Session::new(header)?)
    }

    pub fn list(&self) -> Vec<SessionListing> {
        let handles: Vec<_> =
            self.sessions.read().unwrap_or_else(|e| e.into_inner()).values().cloned().collect();
        let mut listing: Vec<_> = handles.iter().map(|s| lock(s).listing()).collect();
        listing.sort_by(|a, b| (a.created_at_ms, &a.id).cmp(&(b.created_at_ms, &b.id)));
        listing
    }

    pub fn snapshot(&self, id: &str) -> Result<SessionSnapshot> {
        let handle = self.get(id)?;
        let snapshot = lock(&handle).snapshot();
        Ok(snapshot)
    }

    /// The pending query; a finished session has none and reports a conflict.
    pub fn query(&self, id: &str) -> Result<EvalQuery> {
        let handle = self.get(id)?;
        let query = lock(&handle).pending_query();
        query.ok_or_else(|| SessionError::Conflict(format!("session {id} is finished")))
    }

    pub fn submit(&self, id: &str, request: SubmitRequest) -> Result<SubmitResponse> {
        let handle = self.get(id)?;
        let mut session = lock(&handle);
        let record =
            AnswerRecord { query_id: request.query_id, answer: request.answer, timestamp_ms: now_ms() };
        let (response, _) = session.submit_with(record, |r| self.store.append(id, r))?;
        Ok(response)
    }

    pub fn export(&self, id: &str) -> Result<ReplayFile> {
        let handle = self.get(id)?;
        let session = lock(&handle);
        Ok(ReplayFile {
            format: REPLAY_FORMAT.into(),
            version: REPLAY_VERSION,
            session: session.header().clone(),
            answers: session.answers().to_vec(),
        })
    }

    /// Recreates an exported session under its original id.
    pub fn import(&self, file: ReplayFile) -> Result<SessionSnapshot> {
        if file.format != REPLAY_FORMAT {
            return Err(SessionError::validation(
                format!("expected format {REPLAY_FORMAT:?}"),
                "format",
            ));
        }
        if file.version != REPLAY_VERSION {
            return Err(SessionError::validation(
                format!("unsupported version {}", file.version),
                "version",
            ));
        }
        if !valid_id(&file.session.id) {
            return Err(SessionError::validation(
                "ids use 1 to 64 letters, digits, '-' or '_'",
                "session.id",
            ));
        }
        validate_params(file.session.algorithm, &params_of(&file.session))?;
        let session = Session::replay(file.session, &file.answers)?;
        self.insert(session)
    }
}

/// The client-facing parameters recorded in a header.
fn params_of(header: &SessionHeader) -> crate::protocol::SessionParams {
    let c = &header.config;
    crate::protocol::SessionParams {
        dim: c.dim,
        population: c.population,
        generations: c.generations,
        levels: c.levels,
        domain: c.domain.clone(),
        ga: c.ga.clone(),
        de: c.de.clone(),
    }
}
