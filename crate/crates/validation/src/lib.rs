//! Acceptance checks for `topiclens`. Everything lives under `tests/`.
