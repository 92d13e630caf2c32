use fluxkit_cli::script::{Script, EXIT_ERROR, EXIT_OK};

fn run(text: &str) -> (String, i32) {
    let o = Script::parse(text).unwrap().run();
    (o.transcript, o.exit_code)
}

#[test]
fn transcript_echoes_statements() {
    let (out, code) = run("state Z0 = [f(1) | Z]\nknows f(1) Z0\n");
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "?- state Z0 = [f(1) | Z]\nZ0 = [f(1) | Z]\n\n?- knows f(1) Z0\nyes\n\n");
}

#[test]
fn closed_and_empty_states() {
    let (out, _) = run("state Z0 = [f(1), f(2)]\nstate W\nshow W\n");
    assert!(out.contains("Z0 = [f(1), f(2)]\n"));
    assert!(out.contains("W = W\n"));
}

#[test]
fn fd_syntax() {
    let (out, code) = run(
        "state Z0 = [p(X,Y) | Z]\nrange X,Y 0..3\nfd X + 1 #= Y #/\\ (Y #< 3 #\\/ Y #>= 5)\nfd X #\\= 0\nexpect known Z0 == [p(1,2) | Z]\n",
    );
    assert_eq!(code, EXIT_OK, "{out}");
}

#[test]
fn symbolic_disequality() {
    let (out, code) = run("state Z0 = [s(X) | Z]\nfd X #= a #\\/ X #= b\nfd X #\\= a\nexpect known Z0 == [s(b) | Z]\n");
    assert_eq!(code, EXIT_OK, "{out}");
    let (out, code) = run("state Z0 = [s(X) | Z]\nfd X #< a\n");
    assert_eq!(code, EXIT_ERROR);
    assert!(out.contains("symbolic"), "{out}");
}

#[test]
fn update_holds_and_cancel() {
    let (out, code) = run(concat!(
        "state Z0 = [f(1) | Z]\n",
        "duplicate_free Z0\n",
        "update Z1 = Z0 [f(2)] [f(1)]\n",
        "expect known Z1 == [f(2) | Z]\n",
        "expect knows_not f(1) Z1\n",
        "or_holds [g(1), g(2)] Z1\n",
        "cancel Z2 = Z1 g(1)\n",
        "expect lacks Z2 or_holds([g(1),g(2)], Z)\n",
        "holds g(3) Z2 Rest\n",
        "expect known Rest == [f(2) | Z]\n",
        "expect knows_not g(3) Rest\n",
        "expect knows g(3) Z2\n",
    ));
    assert_eq!(code, EXIT_OK, "{out}");
}

#[test]
fn knows_val_variables_are_local() {
    let (out, code) = run(concat!(
        "state Z0 = [at(X,2), at(1,Y) | Z]\n",
        "knows_val [Y] at(_,Y) Z0\n",
        "knows_val [X,Y] at(X,Y) Z0\n",
    ));
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("?- knows_val [Y] at(_,Y) Z0\nY = 2\n"), "{out}");
    assert!(out.contains("?- knows_val [X,Y] at(X,Y) Z0\nno\n"), "{out}");
}

#[test]
fn knowledge_of_nonground_fluents_is_an_error() {
    let (out, code) = run("state Z0 = [f(X) | Z]\nknows f(X) Z0\n");
    assert_eq!(code, EXIT_ERROR);
    assert!(out.contains("error (line 2)"));
}

#[test]
fn actions_need_a_domain() {
    let (_, code) = run("state Z0 = [f(1) | Z]\ndo Z1 = Z0 go [false]\n");
    assert_eq!(code, EXIT_ERROR);
    let (out, code) = run("state Z0\ndomain switches\ndo Z1 = Z0 alter(t1, t2)\n");
    assert_eq!(code, EXIT_ERROR);
    assert!(out.contains("arity"), "{out}");
}

#[test]
fn parse_errors() {
    for (text, line) in [
        ("state Z0 = [f(1) | Z\n", 1),
        ("\nfoo bar\n", 2),
        ("state z0\n", 1),
        ("fd X #= \n", 1),
        ("fd X ## 1\n", 1),
        ("do Z1 = Z0 go [maybe]\n", 1),
        ("# c\nrange X 1-5\n", 2),
        ("expect not knows_val [X] f(X) Z == X = 1\n", 1),
    ] {
        let e = Script::parse(text).err().unwrap_or_else(|| panic!("accepted {text:?}"));
        assert!(e.to_string().contains(&format!("line {line}:")), "{text:?}: {e}");
    }
}

#[test]
fn empty_script_is_empty() {
    let s = Script::parse("").unwrap();
    assert!(s.is_empty());
    assert_eq!(s.run().transcript, "");
}
