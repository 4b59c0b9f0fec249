#pragma once

#include <functional>

namespace mfd3 {

/// Worker cap: MFD3_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
int worker_count();

/// Runs task(0) ... task(n_tasks - 1) on up to max_workers threads. Tasks
/// must write to disjoint outputs; any reduction over their results happens
/// afterwards in task order, so results do not depend on the worker count.
void parallel_for(int n_tasks, const std::function<void(int)>& task, int max_workers = worker_count());

}  // namespace mfd3
