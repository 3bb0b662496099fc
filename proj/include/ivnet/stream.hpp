#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "ivnet/data.hpp"
#include "ivnet/network.hpp"
#include "ivnet/train.hpp"

namespace ivnet {

/// A class-incremental split of one classification dataset: task k covers
/// classes [k*classes_per_task, (k+1)*classes_per_task) in ascending label
/// order. Labels are remapped per scenario: incremental-task and
/// incremental-domain views carry the within-task class index, while
/// incremental-class views keep the original labels.
struct TaskStream {
    Scenario scenario{Scenario::IncrementalTask};
    std::size_t n_tasks{0};
    std::size_t classes_per_task{0};
    std::vector<std::vector<int>> task_classes;
    std::vector<TaskView> train;
    std::vector<TaskView> test;
};

namespace detail {

inline std::vector<TaskView> split_views(const Dataset& ds, Scenario scenario, std::size_t n_tasks,
                                         std::size_t classes_per_task, const char* which) {
    std::vector<TaskView> views(n_tasks);
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        const int label = ds.labels[i];
        const std::size_t task = std::size_t(label) / classes_per_task;
        if (task >= n_tasks) continue;
        views[task].indices.push_back(i);
        views[task].labels.push_back(scenario == Scenario::IncrementalClass
                                         ? label
                                         : label - int(task * classes_per_task));
    }
    for (std::size_t k = 0; k < n_tasks; ++k) {
        if (views[k].indices.empty())
            throw DataError("build_stream: task " + std::to_string(k) + " has no " + which +
                            " samples");
    }
    return views;
}

}  // namespace detail

inline TaskStream build_stream(const Dataset& train_ds, const Dataset& test_ds, Scenario scenario,
                               std::size_t n_tasks, std::size_t classes_per_task) {
    if (n_tasks == 0 || classes_per_task == 0)
        throw DataError("build_stream: n_tasks and classes_per_task must be positive");
    train_ds.validate();
    test_ds.validate();
    const std::size_t needed = n_tasks * classes_per_task;
    if (needed > train_ds.n_classes || needed > test_ds.n_classes)
        throw DataError("build_stream: " + std::to_string(needed) + " classes requested, dataset has " +
                        std::to_string(std::min(train_ds.n_classes, test_ds.n_classes)));
    if (train_ds.dim() != test_ds.dim())
        throw DataError("build_stream: train/test feature dimensions differ");

    TaskStream s;
    s.scenario = scenario;
    s.n_tasks = n_tasks;
    s.classes_per_task = classes_per_task;
    s.task_classes.resize(n_tasks);
    for (std::size_t k = 0; k < n_tasks; ++k)
        for (std::size_t c = 0; c < classes_per_task; ++c)
            s.task_classes[k].push_back(int(k * classes_per_task + c));
    s.train = detail::split_views(train_ds, scenario, n_tasks, classes_per_task, "train");
    s.test = detail::split_views(test_ds, scenario, n_tasks, classes_per_task, "test");
    return s;
}

}  // namespace ivnet
