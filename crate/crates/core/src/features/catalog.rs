/// Descriptions of branch features 1..=40.
pub const BRANCH_CATALOG: [&str; 40] = [
    "branch in the main function",
    "true branch of a loop",
    "false branch of a loop",
    "branch inside a loop body",
    "true branch of a case statement",
    "false branch of a case statement",
    "condition has a constant operand",
    "condition has an array access (pointer expression)",
    "condition is an equality test",
    "condition joins two or more comparisons",
    "branch belongs to a case statement",
    "enclosing function has at least 10 branches",
    "branch in the first 10% of the path (front parts of a path)",
    "branch in the last 10% of the path",
    "branch appearing most frequently in the execution tree",
    "branch appearing least frequently in the execution tree",
    "branch located right after the just-negated branch",
    "branch in the function of the just-negated branch",
    "context of length 1 not yet negated",
    "context of length 2 not yet negated",
    "context of length 3 not yet negated",
    "context of length 4 not yet negated",
    "context of length 5 not yet negated",
    "branch negated more than 10 times",
    "branch negated more than 20 times",
    "branch negated more than 30 times (frequently negated branch)",
    "opposite branch is uncovered",
    "last negation of the branch failed",
    "negation of the branch failed more than 5 times",
    "opposite branch within distance 10 of an uncovered branch",
    "opposite branch within distance 20 of an uncovered branch",
    "opposite branch covered in the last 10 executions",
    "opposite branch covered in the last 20 executions",
    "opposite branch covered in the last 30 executions",
    "branch in the function with the most uncovered branches",
    "branch in the most recently reached function",
    "branch in the second half of the path",
    "branch never negated so far",
    "enclosing function contains a loop",
    "condition depends on two or more inputs",
];

/// Descriptions of state features 1..=26. Rows 1-19 describe the last branch of the path condition.
pub const STATE_CATALOG: [&str; 26] = [
    "branch in the main function",
    "true branch of a loop",
    "false branch of a loop",
    "branch inside a loop body",
    "true branch of a case statement",
    "false branch of a case statement",
    "branch appearing most frequently",
    "branch appearing least frequently",
    "branch located right after the just-selected branch",
    "branch selected more than 10 times",
    "branch selected more than 20 times",
    "branch selected more than 30 times",
    "branch located in the function of just-selected branch",
    "branch is uncovered",
    "branch selected in the last 10 executions",
    "branch selected in the last 20 executions",
    "branch selected in the last 30 executions",
    "branch in the function that has the largest number of uncovered branches",
    "branch inside the most recently reached function",
    "10% states having the deepest depth",
    "10% states having the shallowest depth",
    "10% states with the smallest number of instructions",
    "10% states with the smallest number of covered instructions in currently executing function",
    "10% states with the lowest query solving cost",
    "10% states that are closest to the uncovered instructions",
    "10% states with the smallest number of executed instructions since the last new instruction was covered",
];
