#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "vocim/common.hpp"

#include <json.hpp>

namespace vocim {

struct OntologyNode {
    std::string id;
    std::string name;
    std::vector<std::string> child_ids;
};

/// Root-to-node category path (node indices into the owning Ontology).
struct OntologyPath {
    std::vector<std::size_t> nodes;
    std::uint64_t ontology_id = 0;

    std::size_t length() const { return nodes.size(); }
};

enum class MultiParentPolicy {
    reject,      // validation error (fixtures must be proper forests)
    first_parent // keep the first-encountered parent, drop later edges
};

/// Immutable hierarchical sound ontology (a forest). All queries are
/// read-only and thread-safe after construction.
class Ontology {
public:
    /// Load from an AudioSet-style JSON list of {id, name, child_ids} records.
    static Ontology from_json(const nlohmann::json& doc,
                              MultiParentPolicy policy = MultiParentPolicy::reject) {
        if (!doc.is_array()) throw ValidationError("ontology: document must be a JSON array");
        Ontology o;
        for (const auto& rec : doc) {
            OntologyNode node;
            node.id = rec.at("id").get<std::string>();
            node.name = rec.value("name", node.id);
            if (rec.contains("child_ids"))
                node.child_ids = rec.at("child_ids").get<std::vector<std::string>>();
            if (o.index_.count(node.id))
                throw ValidationError("ontology: duplicate id: " + node.id);
            o.index_[node.id] = o.nodes_.size();
            o.nodes_.push_back(std::move(node));
        }
        o.link(policy);
        return o;
    }

    static Ontology from_file(const std::string& path,
                              MultiParentPolicy policy = MultiParentPolicy::reject) {
        std::ifstream is(path);
        if (!is) throw IoError("cannot open ontology: " + path);
        nlohmann::json doc;
        is >> doc;
        return from_json(doc, policy);
    }

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t leaf_count() const { return leaf_count_; }
    std::size_t intermediate_count() const { return nodes_.size() - leaf_count_; }
    std::uint64_t id() const { return id_; }
    const std::vector<std::string>& dropped_edges() const { return dropped_edges_; }

    const OntologyNode& node(std::size_t idx) const { return nodes_.at(idx); }

    std::size_t index_of(const std::string& node_id) const {
        auto it = index_.find(node_id);
        if (it == index_.end())
            throw ValidationError("ontology: unknown node id: " + node_id);
        return it->second;
    }

    bool contains(const std::string& node_id) const { return index_.count(node_id) != 0; }

    bool is_leaf(std::size_t idx) const { return nodes_.at(idx).child_ids.empty(); }

    /// Root-to-node path of a node.
    OntologyPath path_of(const std::string& node_id) const {
        std::size_t idx = index_of(node_id);
        OntologyPath p;
        p.ontology_id = id_;
        std::size_t cur = idx;
        while (true) {
            p.nodes.push_back(cur);
            if (parent_[cur] == npos) break;
            cur = parent_[cur];
        }
        std::reverse(p.nodes.begin(), p.nodes.end());
        return p;
    }

    /// Number of matching levels: length of the longest common root prefix.
    std::size_t delta(const OntologyPath& a, const OntologyPath& b) const {
        if (a.ontology_id != id_ || b.ontology_id != id_)
            throw ValidationError("delta: paths belong to a different ontology");
        std::size_t n = std::min(a.nodes.size(), b.nodes.size());
        std::size_t k = 0;
        while (k < n && a.nodes[k] == b.nodes[k]) ++k;
        return k;
    }

    /// All prefixes of a path, shallowest first; prefix i is identified by
    /// its deepest node index.
    std::vector<std::size_t> ancestors(const OntologyPath& p) const {
        if (p.ontology_id != id_)
            throw ValidationError("ancestors: path belongs to a different ontology");
        if (p.nodes.empty()) throw ValidationError("ancestors: empty path");
        return p.nodes;
    }

    std::string path_string(const OntologyPath& p, const std::string& sep = " >> ") const {
        std::string s;
        for (std::size_t i = 0; i < p.nodes.size(); ++i) {
            if (i) s += sep;
            s += nodes_[p.nodes[i]].name;
        }
        return s;
    }

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    void link(MultiParentPolicy policy) {
        parent_.assign(nodes_.size(), npos);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            for (const auto& cid : nodes_[i].child_ids) {
                auto it = index_.find(cid);
                if (it == index_.end())
                    throw ValidationError("ontology: dangling child id '" + cid +
                                          "' under node '" + nodes_[i].id + "'");
                if (parent_[it->second] != npos) {
                    if (policy == MultiParentPolicy::reject)
                        throw ValidationError("ontology: node '" + cid +
                                              "' has multiple parents");
                    dropped_edges_.push_back(nodes_[i].id + " -> " + cid);
                    continue;
                }
                parent_[it->second] = i;
            }
        }
        // cycle check: walking up from any node must terminate
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            std::size_t cur = i, steps = 0;
            while (parent_[cur] != npos) {
                cur = parent_[cur];
                if (++steps > nodes_.size())
                    throw ValidationError("ontology: cycle involving node '" +
                                          nodes_[i].id + "'");
            }
        }
        leaf_count_ = 0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            bool leaf = true;
            for (const auto& cid : nodes_[i].child_ids) {
                // an edge dropped by first_parent still makes the source non-leaf
                (void)cid;
                leaf = false;
                break;
            }
            if (leaf) ++leaf_count_;
        }
        std::string fingerprint;
        for (const auto& n : nodes_) {
            fingerprint += n.id;
            fingerprint += '\0';
        }
        id_ = fnv1a64(fingerprint);
    }

    std::vector<OntologyNode> nodes_;
    std::vector<std::size_t> parent_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> dropped_edges_;
    std::size_t leaf_count_ = 0;
    std::uint64_t id_ = 0;
};

} // namespace vocim
