/// Four arms of length two around a central intersection, gates at the tips.
pub(crate) const PLUS: &str = "5 5\n..g..\n..t..\ngtttg\n..t..\n..g..\n";
