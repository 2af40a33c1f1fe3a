#include "psiland/domain_io.hpp"

#include <fstream>

namespace psiland {

namespace {

using json = nlohmann::ordered_json;

Vector vector_from(const json& j, int dim, const char* field) {
  require(j.is_array(), std::string("domain file: \"") + field + "\" must be an array");
  require(int(j.size()) == dim, std::string("domain file: \"") + field + "\" has wrong length");
  Vector v(dim);
  for (int i = 0; i < dim; ++i) {
    require(j[i].is_number(), std::string("domain file: \"") + field + "\" must be numeric");
    v(i) = j[i].get<double>();
  }
  return v;
}

const json& field(const json& node, const char* name) {
  require(node.contains(name), std::string("domain file: missing field \"") + name + "\"");
  return node.at(name);
}

double number(const json& node, const char* name) {
  const json& j = field(node, name);
  require(j.is_number(), std::string("domain file: \"") + name + "\" must be numeric");
  return j.get<double>();
}

Domain node_from(const json& node, int dim) {
  require(node.is_object(), "domain file: node must be an object");
  const std::string type = field(node, "type").get<std::string>();
  if (type == "ball")
    return Domain(Ball{vector_from(field(node, "center"), dim, "center"), number(node, "radius")});
  if (type == "capsule")
    return Domain(Capsule{vector_from(field(node, "a"), dim, "a"),
                          vector_from(field(node, "b"), dim, "b"), number(node, "radius")});
  if (type == "union")
    return unite(node_from(field(node, "left"), dim), node_from(field(node, "right"), dim));
  if (type == "difference")
    return subtract(node_from(field(node, "left"), dim), node_from(field(node, "right"), dim));
  if (type == "translate")
    return translate(vector_from(field(node, "offset"), dim, "offset"),
                     node_from(field(node, "inner"), dim));
  if (type == "scale") return scale(number(node, "factor"), node_from(field(node, "inner"), dim));
  throw PreconditionError("domain file: unknown node type \"" + type + "\"");
}

json vector_to(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json node_to(const DomainNode& node) {
  json j;
  if (auto* b = std::get_if<Ball>(&node.kind)) {
    j["type"] = "ball";
    j["center"] = vector_to(b->center);
    j["radius"] = b->radius;
  } else if (auto* c = std::get_if<Capsule>(&node.kind)) {
    j["type"] = "capsule";
    j["a"] = vector_to(c->a);
    j["b"] = vector_to(c->b);
    j["radius"] = c->radius;
  } else if (auto* u = std::get_if<UnionNode>(&node.kind)) {
    j["type"] = "union";
    j["left"] = node_to(*u->left);
    j["right"] = node_to(*u->right);
  } else if (auto* d = std::get_if<DifferenceNode>(&node.kind)) {
    j["type"] = "difference";
    j["left"] = node_to(*d->left);
    j["right"] = node_to(*d->right);
  } else if (auto* t = std::get_if<TranslateNode>(&node.kind)) {
    j["type"] = "translate";
    j["offset"] = vector_to(t->offset);
    j["inner"] = node_to(*t->inner);
  } else if (auto* s = std::get_if<ScaleNode>(&node.kind)) {
    j["type"] = "scale";
    j["factor"] = s->factor;
    j["inner"] = node_to(*s->inner);
  } else {
    throw PreconditionError("domain file: perturbed domains have no file representation");
  }
  return j;
}

}  // namespace

Domain domain_from_json(const json& doc) {
  require(doc.is_object(), "domain file: top level must be an object");
  const json& d = field(doc, "dimension");
  require(d.is_number_integer(), "domain file: \"dimension\" must be an integer");
  int dim = d.get<int>();
  require(dim >= 3 && dim <= kMaxDim, "domain file: dimension must be in [3, 8]");
  try {
    return node_from(field(doc, "root"), dim);
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("domain file: ") + e.what());
  }
}

json domain_to_json(const Domain& domain) {
  json doc;
  doc["dimension"] = domain.dimension();
  doc["root"] = node_to(domain.node());
  return doc;
}

Domain load_domain(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(bool(in), "cannot open domain file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw PreconditionError(std::string("domain file: ") + e.what());
  }
  return domain_from_json(doc);
}

}  // namespace psiland
