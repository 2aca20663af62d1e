#include "fixtures.hpp"

#include <cctype>
#include <chrono>
#include <map>
#include <sstream>

#include "forkscope/similarity.hpp"

namespace fixtures {

using namespace forkscope;

SnapshotTree tree(const std::vector<std::pair<std::string, std::string>>& files) {
    SnapshotTree t;
    for (const auto& [path, text] : files) t[path].lines = split_lines(text);
    return t;
}

SnapshotTree tree(std::initializer_list<std::pair<std::string, std::string>> files) {
    return tree(std::vector<std::pair<std::string, std::string>>(files));
}

Builder& Builder::adopt(const std::vector<CommitRecord>& commits, SnapshotTree tree) {
    commits_ = commits;
    tree_ = std::move(tree);
    trees_.clear();
    if (!commits_.empty()) trees_[commits_.back().id] = tree_;
    return *this;
}

Builder& Builder::commit(const CommitId& id, UnixSeconds time, const SnapshotTree& after, const std::string& author) {
    std::vector<CommitId> parents;
    if (!commits_.empty()) parents.push_back(commits_.back().id);
    return commit_with_parents(id, time, after, std::move(parents), author);
}

Builder& Builder::commit_with_parents(const CommitId& id, UnixSeconds time, const SnapshotTree& after,
                                      std::vector<CommitId> parents, const std::string& author) {
    CommitRecord c;
    c.id = id;
    c.parents = std::move(parents);
    c.author_time = time;
    c.author_id = author;
    // Diffs are taken against the first parent, as git records merges.
    static const SnapshotTree nothing;
    const SnapshotTree* before = &nothing;
    if (!c.parents.empty()) {
        auto it = trees_.find(c.parents.front());
        before = it != trees_.end() ? &it->second : &tree_;
    }
    c.file_changes = diff_trees(*before, after);
    trees_[id] = after;
    commits_.push_back(std::move(c));
    tree_ = after;
    staging_ = false;
    return *this;
}

Builder& Builder::put(const std::string& path, const std::string& text) {
    if (!staging_) {
        staged_ = tree_;
        staging_ = true;
    }
    staged_[path].lines = split_lines(text);
    staged_[path].binary = false;
    return *this;
}

Builder& Builder::erase(const std::string& path) {
    if (!staging_) {
        staged_ = tree_;
        staging_ = true;
    }
    staged_.erase(path);
    return *this;
}

Builder& Builder::commit_staged(const CommitId& id, UnixSeconds time, const std::string& author) {
    SnapshotTree next = staging_ ? staged_ : tree_;
    return commit(id, time, next, author);
}

RepoHistory Builder::build(bool truncated) const { return RepoHistory::build(repo_id_, commits_, truncated); }

std::string c_source(std::mt19937_64& rng, std::size_t functions, const std::string& prefix) {
    static const char* types[] = {"int", "long", "double", "unsigned", "char"};
    static const char* ops[] = {"+", "-", "*", "^", "|", "&"};
    std::ostringstream out;
    out << "#include <stdio.h>\n\n";
    for (std::size_t f = 0; f < functions; ++f) {
        const char* ty = types[rng() % 5];
        out << ty << " " << prefix << f << "_" << rng() % 1000 << "(" << ty << " a, int b) {\n";
        const std::size_t stmts = 2 + rng() % 5;
        for (std::size_t s = 0; s < stmts; ++s) {
            switch (rng() % 4) {
                case 0: out << "    a = a " << ops[rng() % 6] << " " << rng() % 97 << ";\n"; break;
                case 1: out << "    if (b > " << rng() % 50 << ") { b -= " << 1 + rng() % 9 << "; }\n"; break;
                case 2: out << "    for (int i = 0; i < b; ++i) a " << ops[rng() % 6] << "= i;\n"; break;
                default: out << "    printf(\"%d\\n\", (int)a + b * " << rng() % 13 << ");\n"; break;
            }
        }
        out << "    return a;\n}\n\n";
    }
    return out.str();
}

std::string rename_identifiers(const std::string& source, const std::string& suffix) {
    std::string out;
    std::size_t i = 0;
    bool in_string = false;
    while (i < source.size()) {
        const char c = source[i];
        if (c == '"' && (i == 0 || source[i - 1] != '\\')) in_string = !in_string;
        if (!in_string && (std::isalpha(static_cast<unsigned char>(c)) || c == '_')) {
            std::size_t j = i;
            while (j < source.size() && (std::isalnum(static_cast<unsigned char>(source[j])) || source[j] == '_')) ++j;
            const std::string word = source.substr(i, j - i);
            if (keyword_class(word) == 0) out += word + suffix;
            else out += word;
            i = j;
            continue;
        }
        out += c;
        ++i;
    }
    return out;
}

TempDir::TempDir(const std::string& tag) {
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() / ("forkscope-" + tag + "-" + std::to_string(stamp));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

}  // namespace fixtures
