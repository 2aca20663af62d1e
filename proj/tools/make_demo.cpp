// Writes the demo corpus: six synthetic repositories (one upstream, three
// prefix forks, one bulk-upload fork, one unrelated project) with hosting
// metadata, signatures, a survivability registry and a pipeline config.

#include <filesystem>
#include <iostream>
#include <random>

#include <nlohmann/json.hpp>

#include "forkscope/history.hpp"
#include "forkscope/io.hpp"

namespace fs = std::filesystem;
using namespace forkscope;
using nlohmann::json;

namespace {

constexpr UnixSeconds kEpoch = 1640995200;  // 2022-01-01
constexpr UnixSeconds kDay = kSecondsPerDay;

const std::vector<std::string> kVuln1{"    memcpy(buf, payload, size);", "    buf[size] = 0;"};
const std::vector<std::string> kPatch1{"    if (size >= sizeof(buf)) return false;", "    memcpy(buf, payload, size);"};
const std::vector<std::string> kVuln2{"    stack.pop_back();", "    return stack.back();"};
const std::string kPatch2Guard = "    if (stack.empty()) return 0;";

std::vector<std::string> function(std::mt19937_64& rng, const std::string& name) {
    auto k = [&] { return std::to_string(rng() % 97 + 1); };
    std::vector<std::string> out{"int " + name + "(int a, int b) {", "    int acc = a * " + k() + ";"};
    const std::size_t body = 3 + rng() % 4;
    for (std::size_t i = 0; i < body; ++i) {
        switch (rng() % 6) {
            case 0:
                out.push_back("    for (int i = 0; i < b; ++i) {");
                out.push_back("        acc += i ^ " + k() + ";");
                out.push_back("    }");
                break;
            case 1: out.push_back("    if (acc > " + k() + ") acc -= b;"); break;
            case 2: out.push_back("    acc = (acc << " + std::to_string(rng() % 7 + 1) + ") | (b & " + k() + ");"); break;
            case 3:
                out.push_back("    while (acc % " + k() + " != 0) {");
                out.push_back("        acc = acc / 2 + b;");
                out.push_back("    }");
                break;
            case 4: out.push_back("    b = helper_" + std::to_string(rng() % 9) + "(acc, b);"); break;
            default: out.push_back("    acc += b * " + k() + " - a;"); break;
        }
    }
    out.push_back("    return acc;");
    out.push_back("}");
    out.push_back("");
    return out;
}

void append(std::vector<std::string>& lines, const std::vector<std::string>& more) {
    lines.insert(lines.end(), more.begin(), more.end());
}

// Inserts `block` just before the last closing brace of the function named `fn`.
void insert_into(std::vector<std::string>& lines, const std::string& fn, const std::vector<std::string>& block) {
    auto it = std::find_if(lines.begin(), lines.end(), [&](const std::string& l) { return l.rfind("int " + fn + "(", 0) == 0; });
    if (it == lines.end()) throw std::runtime_error("no function " + fn);
    auto ret = std::find(it, lines.end(), "    return acc;");
    lines.insert(ret, block.begin(), block.end());
}

void replace_block(std::vector<std::string>& lines, const std::vector<std::string>& from, const std::vector<std::string>& to) {
    auto it = std::search(lines.begin(), lines.end(), from.begin(), from.end());
    if (it == lines.end()) throw std::runtime_error("block not found");
    it = lines.erase(it, it + static_cast<long>(from.size()));
    lines.insert(it, to.begin(), to.end());
}

class Repo {
public:
    explicit Repo(std::string id) : id_(std::move(id)) {}

    void commit(const std::string& tag, UnixSeconds t, const std::string& author) {
        CommitRecord c;
        c.id = id_hash(tag);
        if (!commits_.empty()) c.parents.push_back(commits_.back().id);
        c.author_time = t;
        c.author_id = author;
        c.file_changes = diff_trees(last_, tree);
        commits_.push_back(std::move(c));
        last_ = tree;
    }

    void adopt(const std::vector<CommitRecord>& prefix, const SnapshotTree& at) {
        commits_ = prefix;
        tree = at;
        last_ = at;
    }

    RepoHistory build() const { return RepoHistory::build(id_, commits_, false); }
    const std::vector<CommitRecord>& commits() const { return commits_; }

    SnapshotTree tree;

private:
    std::string id_hash(const std::string& tag) const { return sha256_hex(id_ + ":" + tag).substr(0, 40); }

    std::string id_;
    std::vector<CommitRecord> commits_;
    SnapshotTree last_;
};

std::string pick(std::mt19937_64& rng, const std::vector<std::string>& v) { return v[rng() % v.size()]; }

RepoHistory make_upstream(std::vector<SnapshotTree>& snapshots) {
    std::mt19937_64 rng(2022);
    Repo r("upstream/coin");
    const std::vector<std::string> files{"src/net.cpp", "src/wallet.cpp", "src/script.cpp", "src/util.h", "src/main.cpp"};
    const std::vector<std::string> authors{"satoshi@coin.dev", "hal@coin.dev", "gavin@coin.dev", "wlad@coin.dev",
                                           "pieter@coin.dev"};
    r.tree["README.md"].lines = {"# coin", "", "Reference node."};
    for (const auto& f : files) {
        auto& l = r.tree[f].lines;
        l = {"#include \"util.h\"", ""};
        for (int i = 0; i < 2; ++i) append(l, function(rng, "coin_" + fs::path(f).stem().string() + "_" + std::to_string(i)));
    }
    append(r.tree["src/net.cpp"].lines, {"bool coin_net_read(char* payload, int size) {", "    char buf[256];",
                                          "    memcpy(buf, payload, size);", "    return true;", "}", ""});
    append(r.tree["src/script.cpp"].lines, {"int coin_script_top(std::vector<int>& stack) {", "    return stack.back();", "}", ""});

    UnixSeconds t = kEpoch;
    for (int i = 0; i < 60; ++i) {
        if (i > 0) {
            const std::string f = pick(rng, files);
            append(r.tree[f].lines, function(rng, "coin_" + fs::path(f).stem().string() + "_v" + std::to_string(i)));
            if (rng() % 3 == 0) r.tree["README.md"].lines.push_back("- change " + std::to_string(i));
        }
        if (i == 6) {
            auto& l = r.tree["src/net.cpp"].lines;
            replace_block(l, {"    memcpy(buf, payload, size);", "    return true;"}, {kVuln1[0], kVuln1[1], "    return true;"});
        }
        if (i == 15) replace_block(r.tree["src/script.cpp"].lines, {"    return stack.back();"}, kVuln2);
        if (i == 40) replace_block(r.tree["src/net.cpp"].lines, kVuln1, kPatch1);
        if (i == 20) insert_into(r.tree["src/main.cpp"].lines, "coin_main_0", {"    acc += 1;"});
        // Contributors thin out over time.
        const std::size_t active = i < 30 ? authors.size() : i < 50 ? 3 : 2;
        r.commit("c" + std::to_string(i), t, authors[rng() % active]);
        snapshots.push_back(r.tree);
        t += (6 + static_cast<UnixSeconds>(rng() % 5)) * kDay + static_cast<UnixSeconds>(rng() % 3600);
    }
    return r.build();
}

RepoHistory make_prefix_fork(const std::string& id, const RepoHistory& parent, const std::vector<SnapshotTree>& snaps,
                             std::size_t shared, std::size_t own, std::uint64_t seed, bool patch_script) {
    std::mt19937_64 rng(seed);
    Repo r(id);
    std::vector<CommitRecord> prefix(parent.commits().begin(), parent.commits().begin() + static_cast<long>(shared));
    r.adopt(prefix, snaps[shared - 1]);
    const std::string name = fs::path(id).filename().string();
    UnixSeconds t = prefix.back().author_time + 2 * kDay;
    r.tree["README.md"].lines = {"# " + name, "", "A fork of coin with faster blocks."};
    for (std::size_t i = 0; i < own; ++i) {
        append(r.tree["src/" + name + ".cpp"].lines, function(rng, name + "_f" + std::to_string(i)));
        if (rng() % 2) append(r.tree["src/main.cpp"].lines, function(rng, name + "_main" + std::to_string(i)));
        if (patch_script && i == own / 2) {
            replace_block(r.tree["src/script.cpp"].lines, kVuln2, {kVuln2[0], kPatch2Guard, kVuln2[1]});
        }
        r.commit("own" + std::to_string(i), t, "dev" + std::to_string(rng() % 3) + "@" + name + ".io");
        t += (3 + static_cast<UnixSeconds>(rng() % 20)) * kDay;
    }
    return r.build();
}

SnapshotTree renamed(const SnapshotTree& tree, const std::string& from, const std::string& to) {
    SnapshotTree out;
    for (const auto& [path, file] : tree) {
        SnapshotFile f = file;
        for (auto& line : f.lines)
            for (std::size_t pos = line.find(from); pos != std::string::npos; pos = line.find(from, pos + to.size()))
                line.replace(pos, from.size(), to);
        out[path] = f;
    }
    return out;
}

RepoHistory make_bulk_fork(const RepoHistory& parent, const std::vector<SnapshotTree>& snaps, std::size_t version) {
    std::mt19937_64 rng(404);
    Repo r("forks/dcoin");
    r.tree["README.md"].lines = {"# dcoin", "", "Coming soon."};
    const UnixSeconds upload = parent.commits()[version].author_time + kDay;
    r.commit("init", upload - 20 * kDay, "founder@dcoin.org");
    r.tree = renamed(snaps[version], "coin_", "dcoin_");
    r.tree["README.md"].lines = {"# dcoin", "", "Independent privacy coin."};
    r.commit("bulk", upload, "founder@dcoin.org");
    UnixSeconds t = upload + kDay;
    for (int i = 0; i < 6; ++i) {
        append(r.tree["src/privacy.cpp"].lines, function(rng, "dcoin_privacy_" + std::to_string(i)));
        r.commit("own" + std::to_string(i), t, "founder@dcoin.org");
        t += 9 * kDay;
    }
    return r.build();
}

RepoHistory make_unrelated() {
    std::mt19937_64 rng(99);
    Repo r("other/ecoin");
    const std::vector<std::string> files{"lib/chain.c", "lib/pow.c", "lib/rpc.c"};
    UnixSeconds t = kEpoch + 90 * kDay;
    for (int i = 0; i < 25; ++i) {
        const std::string f = pick(rng, files);
        append(r.tree[f].lines, function(rng, "e_" + fs::path(f).stem().string() + std::to_string(i)));
        r.commit("e" + std::to_string(i), t, "e" + std::to_string(rng() % 4) + "@ecoin.net");
        t += (4 + static_cast<UnixSeconds>(rng() % 12)) * kDay;
    }
    return r.build();
}

std::string stem(const std::string& id) {
    std::string out;
    for (char c : id) out += c == '/' ? std::string("__") : std::string(1, c);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: forkscope_make_demo OUTPUT_DIR\n";
        return 2;
    }
    const fs::path out = argv[1];
    std::vector<SnapshotTree> snaps;
    const RepoHistory upstream = make_upstream(snaps);
    std::vector<RepoHistory> repos{upstream,
                                   make_prefix_fork("forks/acoin", upstream, snaps, 30, 12, 11, false),
                                   make_prefix_fork("forks/bcoin", upstream, snaps, 45, 10, 12, true),
                                   make_prefix_fork("forks/ccoin", upstream, snaps, 12, 20, 13, false),
                                   make_bulk_fork(upstream, snaps, 35),
                                   make_unrelated()};

    struct Meta {
        std::uint64_t watch, star, fork, open, closed, branches, releases, pulls;
    };
    const std::vector<Meta> meta{{310, 5400, 1200, 410, 3900, 12, 41, 2800}, {12, 140, 30, 9, 60, 3, 6, 20},
                                 {25, 380, 44, 14, 120, 5, 9, 55},          {3, 21, 2, 1, 4, 1, 0, 2},
                                 {8, 95, 11, 6, 17, 2, 3, 9},               {40, 700, 90, 35, 210, 7, 12, 140}};
    UnixSeconds newest = 0;
    for (std::size_t i = 0; i < repos.size(); ++i) {
        const auto& h = repos[i];
        newest = std::max(newest, h.at(h.head()).author_time);
        save_history(h, out / "histories" / (stem(h.repo_id()) + ".json"));
        const Meta& m = meta[i];
        json doc{{"watch", m.watch},       {"star", m.star},          {"fork", m.fork},
                 {"issues_open", m.open},  {"issues_closed", m.closed}, {"branches", m.branches},
                 {"releases", m.releases}, {"pull_requests", m.pulls}, {"fetched_at", 1700000000}};
        write_file_atomic(out / "metadata" / (stem(h.repo_id()) + ".json"), doc.dump(2) + "\n");
    }

    json sigs{{"signatures",
               {{{"cve_id", "DEMO-2022-0001"},
                 {"cvss", 7.5},
                 {"category", "Overflow"},
                 {"reference_patch_time", upstream.commits()[40].author_time},
                 {"vuln_fragments", {"memcpy(buf, payload, size);\nbuf[size] = 0;"}},
                 {"patch_fragments", {"if (size >= sizeof(buf)) return false;\nmemcpy(buf, payload, size);"}}},
                {{"cve_id", "DEMO-2022-0002"},
                 {"cvss", 5.3},
                 {"category", "DoS"},
                 {"reference_patch_time", upstream.commits()[59].author_time},
                 {"match_mode", "all"},
                 {"vuln_fragments", {"stack.pop_back();\nreturn stack.back();"}},
                 {"patch_fragments", {"if (stack.empty()) return 0;\nreturn stack.back();"}}}}}};
    write_file_atomic(out / "signatures.json", sigs.dump(2) + "\n");

    write_file_atomic(out / "registry.csv",
                      "repo_id,delisted_market,repo_unavailable,scam_list_a,scam_list_b\n"
                      "upstream/coin,false,false,false,false\n"
                      "forks/acoin,true,false,false,false\n"
                      "forks/bcoin,false,false,false,false\n"
                      "forks/ccoin,true,true,false,true\n"
                      "forks/dcoin,false,false,true,false\n"
                      "other/ecoin,false,false,false,false\n");
    write_file_atomic(out / "market_caps.csv",
                      "repo_id,market_cap\n"
                      "upstream/coin,550000000000\n"
                      "forks/acoin,1200000\n"
                      "forks/bcoin,84000000\n"
                      "forks/ccoin,30000\n"
                      "forks/dcoin,450000\n"
                      "other/ecoin,9100000\n");

    std::string yaml =
        "# Demo corpus: run with `forkscope run --config demo/pipeline.yaml`.\n"
        "repos:\n";
    for (const auto& h : repos)
        yaml += "  - repo_id: " + h.repo_id() + "\n    source: histories/" + stem(h.repo_id()) +
                ".json\n    metadata: metadata/" + stem(h.repo_id()) + ".json\n";
    yaml += "parent_repo_id: upstream/coin\n"
            "as_of: " + std::to_string(newest) + "\n"
            "windows: [3m, 6m, 12m]\n"
            "kmeans:\n  k_range: [2, 4]\n  seed: 42\n  restarts: 10\n"
            "select_features:\n  stop_after: 5\n"
            "similarity:\n  min_match: 9\n  extensions: [.c, .cc, .cpp, .h, .hpp]\n  pairing: greedy\n"
            "lineage:\n  prefix_probe: 10\n  window_secs: 2592000\n  stride: 1\n  default_threshold: 0.9\n"
            "vulnscan:\n  signature_file: signatures.json\n  fallback_file_limit: 30\n"
            "registry_file: registry.csv\n"
            "market_cap_file: market_caps.csv\n"
            "analytics:\n  vuln_buckets: [1, 2]\n  similarity_buckets: [0.95, 0.90, 0.80]\n  similarity_low_bucket: 0.5\n"
            "output_dir: out\n";
    write_file_atomic(out / "pipeline.yaml", yaml);
    std::cout << "wrote demo corpus to " << out.string() << "\n";
    return 0;
}
