use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::DataError;

const EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub path: PathBuf,
    pub label: usize,
}

/// Files of both splits with their labels. Class index is the rank of the
/// class directory name in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub class_names: Vec<String>,
    pub train: Vec<Entry>,
    pub test: Vec<Entry>,
}

impl DatasetIndex {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn entries(&self, split: Split) -> &[Entry] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    /// Number of files of `class` in `split`.
    pub fn count(&self, split: Split, class: usize) -> usize {
        self.entries(split).iter().filter(|e| e.label == class).count()
    }

    pub fn label_of(&self, path: &Path) -> Option<usize> {
        self.train.iter().chain(&self.test).find(|e| e.path == path).map(|e| e.label)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

fn is_image(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

fn sorted_children(dir: &Path, want_dirs: bool) -> Result<Vec<PathBuf>, DataError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path();
        let is_dir = path.is_dir();
        if is_dir == want_dirs && (is_dir || is_image(&path)) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Reads only the image header; rejects unreadable or zero-sized images.
fn check_header(path: &Path) -> Result<(), DataError> {
    let decode = |reason: String| DataError::Decode { path: path.to_path_buf(), reason };
    let (w, h) = ::image::ImageReader::open(path)
        .map_err(io_err(path))?
        .with_guessed_format()
        .map_err(io_err(path))?
        .into_dimensions()
        .map_err(|e| decode(e.to_string()))?;
    if w == 0 || h == 0 {
        return Err(DataError::ZeroDimension(path.to_path_buf()));
    }
    Ok(())
}

fn class_dirs(split_dir: &Path) -> Result<Vec<(String, PathBuf)>, DataError> {
    if !split_dir.is_dir() {
        return Err(DataError::MissingSplit(split_dir.to_path_buf()));
    }
    Ok(sorted_children(split_dir, true)?
        .into_iter()
        .map(|p| (p.file_name().unwrap_or_default().to_string_lossy().into_owned(), p))
        .collect())
}

/// Indexes `<root>/{train,test}/<ClassName>/*.{jpg,jpeg,png}`.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<DatasetIndex, DataError> {
    let root = root.as_ref();
    let has_split = |s: Split| root.join(s.dir_name()).is_dir();
    if !has_split(Split::Train) && !has_split(Split::Test) && sorted_children(root, true)?.is_empty() {
        return Err(DataError::NoClasses(root.to_path_buf()));
    }
    let train_dirs = class_dirs(&root.join(Split::Train.dir_name()))?;
    let test_dirs = class_dirs(&root.join(Split::Test.dir_name()))?;
    if train_dirs.is_empty() && test_dirs.is_empty() {
        return Err(DataError::NoClasses(root.to_path_buf()));
    }
    let names = |dirs: &[(String, PathBuf)]| dirs.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    let class_names = names(&train_dirs);
    if class_names != names(&test_dirs) {
        return Err(DataError::ClassMismatch { train: class_names, test: names(&test_dirs) });
    }

    let collect = |dirs: &[(String, PathBuf)]| -> Result<Vec<Entry>, DataError> {
        let mut entries = Vec::new();
        for (label, (_, dir)) in dirs.iter().enumerate() {
            let files = sorted_children(dir, false)?;
            if files.is_empty() {
                return Err(DataError::EmptyClass(dir.clone()));
            }
            for path in files {
                check_header(&path)?;
                entries.push(Entry { path, label });
            }
        }
        Ok(entries)
    };
    Ok(DatasetIndex { root: root.to_path_buf(), train: collect(&train_dirs)?, test: collect(&test_dirs)?, class_names })
}
