mod common;

use common::{bless, fixtures_dir, generate_fixtures, read_tree};

#[test]
fn committed_fixtures_match_generator() {
    let tmp = tempfile::tempdir().unwrap();
    generate_fixtures(tmp.path());
    let fresh = read_tree(tmp.path());
    if bless() {
        generate_fixtures(&fixtures_dir());
    }
    let committed = read_tree(&fixtures_dir());
    for (path, bytes) in &fresh {
        assert_eq!(committed.get(path), Some(bytes), "{} differs from the generator", path.display());
    }
}
