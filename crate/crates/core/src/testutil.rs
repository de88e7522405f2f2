use crate::framenet::FrameStore;

/// The bundled store: its Attack frame mentions Assailant, Victim and Purpose
/// in the definition and lists Weapon only in `fe_order`.
pub(crate) fn attack_store() -> FrameStore {
    crate::synthetic::store()
}
