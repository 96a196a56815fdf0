pub mod cli;
pub mod gates;
pub mod interp;
pub mod lang;
pub mod qstate;
pub mod stdlib;
