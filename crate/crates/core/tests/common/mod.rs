pub mod oracle_cases;
