#include "cep/schema.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

#include "cep/error.hpp"

namespace cep {

SchemaGraph::SchemaGraph(std::vector<TablePtr> tables, std::vector<JoinEdge> joins, std::string hub)
    : tables_(std::move(tables)), joins_(std::move(joins)), hub_(std::move(hub)) {
  hub_index_ = require_table(hub_);
  for (const auto& edge : joins_) {
    table(require_table(edge.child)).require_column(edge.fk);
    table(require_table(edge.parent)).require_column(edge.pk);
  }
  if (joins_.size() + 1 != tables_.size()) {
    throw ValidationError("join graph must be a tree: expected " + std::to_string(tables_.size() - 1) +
                          " joins, found " + std::to_string(joins_.size()));
  }
  const auto tree = build_join_tree(*this);
  if (tree.order.size() != tables_.size()) {
    throw ValidationError("join graph does not connect every table to the hub");
  }
}

std::optional<size_t> SchemaGraph::table_index(std::string_view name) const {
  for (size_t i = 0; i < tables_.size(); ++i) {
    if (tables_[i]->name() == name) {
      return i;
    }
  }
  return std::nullopt;
}

size_t SchemaGraph::require_table(std::string_view name) const {
  const auto index = table_index(name);
  if (!index) {
    throw ConfigError("unknown table '" + std::string(name) + "'");
  }
  return *index;
}

bool SchemaGraph::is_join_column(size_t table_idx, size_t column) const {
  const auto& t = table(table_idx);
  const auto& name = t.column(column).name;
  return std::any_of(joins_.begin(), joins_.end(), [&](const JoinEdge& e) {
    return (e.child == t.name() && e.fk == name) || (e.parent == t.name() && e.pk == name);
  });
}

SchemaGraph SchemaGraph::with_table(size_t index, TablePtr replacement) const {
  auto tables = tables_;
  tables.at(index) = std::move(replacement);
  return with_tables(std::move(tables));
}

SchemaGraph SchemaGraph::with_tables(std::vector<TablePtr> replacement) const {
  if (replacement.size() != tables_.size()) {
    throw ValidationError("replacement table list has the wrong size");
  }
  for (size_t i = 0; i < tables_.size(); ++i) {
    if (replacement[i]->name() != tables_[i]->name()) {
      throw ValidationError("replacement table '" + replacement[i]->name() + "' is out of order");
    }
  }
  return SchemaGraph(std::move(replacement), joins_, hub_);
}

void SchemaGraph::check_fk_coverage() const {
  for (const auto& edge : joins_) {
    const auto& parent = table(require_table(edge.parent));
    const auto& child = table(require_table(edge.child));
    const size_t pk = parent.require_column(edge.pk);
    const size_t fk = child.require_column(edge.fk);
    std::unordered_map<double, size_t> seen;
    for (size_t r = 0; r < parent.row_count(); ++r) {
      if (!seen.emplace(parent.at(r, pk), r).second) {
        throw ValidationError(edge.parent + "." + edge.pk + " is not unique");
      }
    }
    for (size_t r = 0; r < child.row_count(); ++r) {
      if (!seen.contains(child.at(r, fk))) {
        throw ValidationError(edge.child + "." + edge.fk + " row " + std::to_string(r) +
                              " references a missing " + edge.parent + "." + edge.pk);
      }
    }
  }
}

JoinTree build_join_tree(const SchemaGraph& db, std::span<const size_t> scope) {
  const size_t n = db.num_tables();
  JoinTree tree;
  tree.root = db.hub_index();
  tree.links.assign(n, std::nullopt);
  tree.children.assign(n, {});
  tree.in_scope.assign(n, scope.empty());
  for (const size_t t : scope) {
    tree.in_scope.at(t) = true;
  }
  if (!tree.in_scope[tree.root]) {
    throw ValidationError("join scope must contain the hub table '" + db.hub() + "'");
  }

  std::vector<bool> visited(n, false);
  std::deque<size_t> queue{tree.root};
  visited[tree.root] = true;
  while (!queue.empty()) {
    const size_t current = queue.front();
    queue.pop_front();
    tree.order.push_back(current);
    const auto& current_name = db.table(current).name();
    for (const auto& edge : db.joins()) {
      size_t neighbor = 0;
      std::string neighbor_column;
      std::string current_column;
      if (edge.child == current_name) {
        neighbor = db.require_table(edge.parent);
        neighbor_column = edge.pk;
        current_column = edge.fk;
      } else if (edge.parent == current_name) {
        neighbor = db.require_table(edge.child);
        neighbor_column = edge.fk;
        current_column = edge.pk;
      } else {
        continue;
      }
      if (!tree.in_scope[neighbor]) {
        continue;
      }
      if (visited[neighbor]) {
        if (!tree.links[current] || tree.links[current]->parent != neighbor) {
          throw ValidationError("join graph contains a cycle through '" + db.table(neighbor).name() + "'");
        }
        continue;
      }
      visited[neighbor] = true;
      tree.links[neighbor] = TreeLink{current, db.table(neighbor).require_column(neighbor_column),
                                      db.table(current).require_column(current_column)};
      tree.children[current].push_back(neighbor);
      queue.push_back(neighbor);
    }
  }
  const auto in_scope_count = static_cast<size_t>(std::count(tree.in_scope.begin(), tree.in_scope.end(), true));
  if (tree.order.size() != in_scope_count) {
    throw ValidationError("join scope is not connected");
  }
  return tree;
}

}  // namespace cep
